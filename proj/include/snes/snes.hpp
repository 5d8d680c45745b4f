#pragma once

// SPARQL for simulated networks of embedded systems: compressed RDF
// storage, hash-substituted query processing, a binary in-network
// protocol, push-based operators, model-driven query splitting and a
// federating endpoint.

#include "snes/dictionary.hpp"
#include "snes/endpoint.hpp"
#include "snes/error.hpp"
#include "snes/hash.hpp"
#include "snes/netsim.hpp"
#include "snes/operators.hpp"
#include "snes/oracle.hpp"
#include "snes/planner.hpp"
#include "snes/row.hpp"
#include "snes/sparql.hpp"
#include "snes/term.hpp"
#include "snes/tuple_store.hpp"
#include "snes/wire.hpp"
