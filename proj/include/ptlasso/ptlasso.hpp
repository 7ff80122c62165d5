#pragma once

#include "ptlasso/config.hpp"
#include "ptlasso/environment.hpp"
#include "ptlasso/error.hpp"
#include "ptlasso/gram_tree.hpp"
#include "ptlasso/harness.hpp"
#include "ptlasso/lasso.hpp"
#include "ptlasso/plot.hpp"
#include "ptlasso/policy.hpp"
#include "ptlasso/privacy.hpp"
#include "ptlasso/probe.hpp"
#include "ptlasso/random.hpp"
