#ifndef LIFTFIT_LIFTFIT_HPP
#define LIFTFIT_LIFTFIT_HPP

#include "liftfit/error.hpp"
#include "liftfit/model.hpp"
#include "liftfit/lifting.hpp"
#include "liftfit/linalg.hpp"
#include "liftfit/linsolve.hpp"
#include "liftfit/gauss_newton.hpp"
#include "liftfit/recovery.hpp"
#include "liftfit/pipeline.hpp"
#include "liftfit/dataset_io.hpp"

#endif // LIFTFIT_LIFTFIT_HPP
