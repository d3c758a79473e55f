#pragma once

// Umbrella header for the evscore library: EPICS event-log parsing, channel
// grammar analysis, token embeddings, and GRU one-class anomaly scoring.

#include "evscore/channel_grammar.hpp"
#include "evscore/detector.hpp"
#include "evscore/embeddings.hpp"
#include "evscore/error.hpp"
#include "evscore/eval.hpp"
#include "evscore/event_log.hpp"
#include "evscore/pipeline.hpp"
#include "evscore/rng.hpp"
#include "evscore/synth.hpp"
#include "evscore/timestamp.hpp"
