#pragma once

#include <map>
#include <string>

#include "isa/graph.hpp"

namespace isa {

class Rng;

/// Inserts every ParamSet entry into a graph as a trainable leaf and keeps
/// the name -> node mapping for the builders downstream.
class ParamBinding {
public:
    ParamBinding(Graph& g, const ParamSet& params) {
        for (const auto& [name, value] : params) ids_[name] = g.parameter(name, value);
    }

    NodeId operator[](const std::string& name) const {
        auto it = ids_.find(name);
        if (it == ids_.end()) throw LookupError("no parameter '" + name + "' bound");
        return it->second;
    }

    bool has(const std::string& name) const { return ids_.count(name) != 0; }

private:
    std::map<std::string, NodeId> ids_;
};

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
Array2 init_matrix(int rows, int cols, int fan_in, Rng& rng);

}  // namespace isa
