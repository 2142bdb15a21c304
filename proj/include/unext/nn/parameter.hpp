#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "unext/core/error.hpp"
#include "unext/core/tensor.hpp"

namespace unext {

// One learnable (or frozen) tensor plus its optimizer-facing flags.
// decay marks participation in weight decay: convolution/linear weights yes,
// biases and normalization parameters no. buffer marks non-learned state
// (running statistics): checkpointed, never optimized.
template <typename T>
struct Parameter {
    Tensor<T> values;
    std::optional<Tensor<T>> grad;
    bool trainable = true;
    bool decay = true;
    bool buffer = false;
};

// Ordered name -> parameter table. Iteration order is registration order,
// which fixes checkpoint layout and optimizer update order.
template <typename T>
class ParamRegistry {
public:
    void add(const std::string& name, Parameter<T>* p) {
        require(p != nullptr, "registry: null parameter for " + name);
        if (index_.count(name)) throw ConfigError("registry: duplicate parameter name " + name);
        index_[name] = items_.size();
        items_.push_back({name, p});
    }

    Parameter<T>* find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : items_[it->second].second;
    }

    const std::vector<std::pair<std::string, Parameter<T>*>>& items() const { return items_; }
    size_t size() const { return items_.size(); }

    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

private:
    std::vector<std::pair<std::string, Parameter<T>*>> items_;
    std::unordered_map<std::string, size_t> index_;
};

} // namespace unext
