#pragma once

// Umbrella header for the chor toolkit.

#include "chor/ast.hpp"
#include "chor/epp.hpp"
#include "chor/eval.hpp"
#include "chor/parser.hpp"
#include "chor/printer.hpp"
#include "chor/runtime.hpp"
#include "chor/scenario.hpp"
#include "chor/semantics.hpp"
#include "chor/source.hpp"
#include "chor/trace.hpp"
#include "chor/typecheck.hpp"
