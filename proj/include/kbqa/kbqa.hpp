#pragma once

#include "kbqa/encoder.hpp"
#include "kbqa/focus_linker.hpp"
#include "kbqa/graph_executor.hpp"
#include "kbqa/graph_generator.hpp"
#include "kbqa/harness.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/linearizer.hpp"
#include "kbqa/losses.hpp"
#include "kbqa/query_graph.hpp"
#include "kbqa/ranker.hpp"
#include "kbqa/text.hpp"
