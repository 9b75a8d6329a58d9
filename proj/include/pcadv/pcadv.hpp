#pragma once

// Minimal adversarial point-cloud toolkit: sparse perturbation/addition
// attacks against small point-based classifiers, perceptibility metrics,
// defenses, removal baselines, and analysis utilities.

#include "pcadv/analysis.hpp"
#include "pcadv/attack.hpp"
#include "pcadv/baselines.hpp"
#include "pcadv/core.hpp"
#include "pcadv/defense.hpp"
#include "pcadv/driver.hpp"
#include "pcadv/io.hpp"
#include "pcadv/kdtree.hpp"
#include "pcadv/metrics.hpp"
#include "pcadv/net.hpp"
#include "pcadv/report.hpp"
#include "pcadv/rng.hpp"
#include "pcadv/shapes.hpp"
#include "pcadv/train.hpp"
