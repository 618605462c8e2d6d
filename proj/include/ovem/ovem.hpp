#pragma once

#include "ovem/auction.hpp"
#include "ovem/baselines.hpp"
#include "ovem/em.hpp"
#include "ovem/error.hpp"
#include "ovem/experiment.hpp"
#include "ovem/io.hpp"
#include "ovem/numerics.hpp"
#include "ovem/posterior.hpp"
#include "ovem/predictors.hpp"
#include "ovem/quadrature.hpp"
#include "ovem/random.hpp"
#include "ovem/simdata.hpp"
