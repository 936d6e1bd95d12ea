#ifndef XSHIFT_XSHIFT_HPP_
#define XSHIFT_XSHIFT_HPP_

#include "xshift/cli.hpp"
#include "xshift/core.hpp"
#include "xshift/experiments.hpp"
#include "xshift/explain.hpp"
#include "xshift/models.hpp"
#include "xshift/monitor.hpp"
#include "xshift/parallel.hpp"
#include "xshift/report.hpp"
#include "xshift/rng.hpp"
#include "xshift/stats.hpp"
#include "xshift/synth.hpp"

#endif  // XSHIFT_XSHIFT_HPP_
