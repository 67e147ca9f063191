#pragma once

#include "ddqa/error.hpp"
#include "ddqa/eval_seg.hpp"
#include "ddqa/losses.hpp"
#include "ddqa/manifest.hpp"
#include "ddqa/mask_geometry.hpp"
#include "ddqa/metrics.hpp"
#include "ddqa/qa_forge.hpp"
#include "ddqa/score_map_io.hpp"
#include "ddqa/scoring.hpp"
#include "ddqa/stats.hpp"
#include "ddqa/synthetic.hpp"
