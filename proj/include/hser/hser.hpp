#pragma once

#include "hser/audio_io.hpp"
#include "hser/classifier.hpp"
#include "hser/corpus.hpp"
#include "hser/describe.hpp"
#include "hser/eval.hpp"
#include "hser/experiment.hpp"
#include "hser/feature_io.hpp"
#include "hser/features.hpp"
#include "hser/hybrid.hpp"
#include "hser/reasoning/auto_rules.hpp"
#include "hser/reasoning/http_transport.hpp"
#include "hser/reasoning/llm_client.hpp"
#include "hser/reasoning/offline_responder.hpp"
#include "hser/reasoning/prompt.hpp"
#include "hser/reasoning/rules.hpp"
#include "hser/refine.hpp"
#include "hser/wav.hpp"
