#pragma once

// Umbrella header.

#include "divbench/campaign.hpp"
#include "divbench/config.hpp"
#include "divbench/corpus.hpp"
#include "divbench/embedding.hpp"
#include "divbench/error.hpp"
#include "divbench/hull.hpp"
#include "divbench/metrics.hpp"
#include "divbench/pca.hpp"
#include "divbench/pipeline.hpp"
#include "divbench/promptkit.hpp"
#include "divbench/provider.hpp"
#include "divbench/random.hpp"
#include "divbench/report.hpp"
#include "divbench/scorecard.hpp"
#include "divbench/separability.hpp"
#include "divbench/spearman.hpp"
