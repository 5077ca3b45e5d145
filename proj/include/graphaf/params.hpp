#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "graphaf/autodiff.hpp"
#include "graphaf/tensor.hpp"

namespace graphaf {

struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;  // false for buffers such as running statistics
};

// Named, ordered collection of model tensors.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor value, bool trainable = true);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t k) { return params_.at(k); }
  const Parameter& operator[](std::size_t k) const { return params_.at(k); }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::vector<Tensor> zero_grads() const;

 private:
  std::vector<Parameter> params_;
};

// Parameters registered on a tape as leaves aliasing the store. Trainable
// tensors become gradient-tracked variables when `track` is set.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParamStore& store, bool track);

  Var operator[](std::size_t k) const { return vars_.at(k); }
  Tape& tape() const { return *tape_; }
  const ParamStore& store() const { return *store_; }
  // Gradients after tape.backward(), aligned with the store (zeros for
  // buffers and untouched parameters).
  std::vector<Tensor> gradients() const;

 private:
  Tape* tape_;
  const ParamStore* store_;
  std::vector<Var> vars_;
};

// GRAPHAF-CKPT v1: header line, then per tensor
// "tensor <name> <rank> <dims...>" and its values with 17 significant digits.
void save_checkpoint(std::ostream& out, const ParamStore& store);
void save_checkpoint_file(const std::string& path, const ParamStore& store);
// Loads values into an existing store; names, ranks and dims must match the
// store's schema exactly. Throws DataError otherwise.
void load_checkpoint(std::istream& in, ParamStore& store);
void load_checkpoint_file(const std::string& path, ParamStore& store);

}  // namespace graphaf
