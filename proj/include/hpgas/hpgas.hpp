#pragma once

// Hierarchical PGAS runtime: intra-node one-sided transfers by direct
// load/store on shared-memory segments, inter-node transfers by an emulated
// one-sided engine over a byte-stream mesh, unified behind global pointers
// translated through a segid-keyed table.

#include "hpgas/error.hpp"
#include "hpgas/global_memory.hpp"
#include "hpgas/global_ptr.hpp"
#include "hpgas/rma.hpp"
#include "hpgas/runtime.hpp"
#include "hpgas/topology.hpp"
#include "hpgas/transport.hpp"
#include "hpgas/wire.hpp"
