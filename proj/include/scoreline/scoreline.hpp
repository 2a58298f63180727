#pragma once

#include "scoreline/analysis.hpp"
#include "scoreline/errors.hpp"
#include "scoreline/features.hpp"
#include "scoreline/io_align.hpp"
#include "scoreline/io_midi.hpp"
#include "scoreline/io_score.hpp"
#include "scoreline/model.hpp"
#include "scoreline/rational.hpp"
#include "scoreline/score_document.hpp"
#include "scoreline/timemap.hpp"
#include "scoreline/unfold.hpp"
