#pragma once

#include "cnl/graph/graph.hpp"

#include <cstdint>

namespace cnl::graph {

/// G(n, m): exactly m distinct edges drawn uniformly without replacement.
Graph generate_er(std::size_t n, std::size_t m, std::uint64_t seed);

/// Preferential attachment seeded with an m_attach-clique.
Graph generate_ba(std::size_t n, std::size_t m_attach, std::uint64_t seed);

}  // namespace cnl::graph
