#pragma once

#include "semihdp/analysis.hpp"
#include "semihdp/distributions.hpp"
#include "semihdp/error.hpp"
#include "semihdp/oracle_suite.hpp"
#include "semihdp/random.hpp"
#include "semihdp/records_io.hpp"
#include "semihdp/report.hpp"
#include "semihdp/sampler.hpp"
#include "semihdp/scenarios.hpp"
#include "semihdp/state.hpp"
#include "semihdp/theory.hpp"
