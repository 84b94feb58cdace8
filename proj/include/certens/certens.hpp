#pragma once

#include "certens/core.hpp"
#include "certens/ensemblers.hpp"
#include "certens/errors.hpp"
#include "certens/figure.hpp"
#include "certens/io.hpp"
#include "certens/metrics.hpp"
#include "certens/toy_lab.hpp"
#include "certens/weight_learner.hpp"
