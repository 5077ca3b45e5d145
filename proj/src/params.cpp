#include "graphaf/params.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "graphaf/error.hpp"

namespace graphaf {

std::size_t ParamStore::add(std::string name, Tensor value, bool trainable) {
  if (find(name)) throw Error("duplicate parameter name " + name);
  params_.push_back({std::move(name), std::move(value), trainable});
  return params_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (params_[k].name == name) return k;
  }
  return std::nullopt;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.trainable ? p.value.size() : 0;
  return n;
}

std::vector<Tensor> ParamStore::zero_grads() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.value.shape(), 0.0);
  return out;
}

ParamBinding::ParamBinding(Tape& tape, const ParamStore& store, bool track)
    : tape_(&tape), store_(&store) {
  vars_.reserve(store.size());
  for (const auto& p : store) {
    vars_.push_back(track && p.trainable ? tape.variable_ref(p.value) : tape.constant_ref(p.value));
  }
}

std::vector<Tensor> ParamBinding::gradients() const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (std::size_t k = 0; k < vars_.size(); ++k) out.push_back(tape_->grad(vars_[k]));
  return out;
}

namespace {
constexpr const char* kHeader = "GRAPHAF-CKPT v1";
}

void save_checkpoint(std::ostream& out, const ParamStore& store) {
  out << kHeader << '\n';
  out << std::setprecision(17);
  for (const auto& p : store) {
    const auto& shape = p.value.shape();
    out << "tensor " << p.name << ' ' << shape.size();
    for (auto d : shape) out << ' ' << d;
    out << '\n';
    const auto values = p.value.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      out << values[k] << ((k + 1) % 8 == 0 || k + 1 == values.size() ? '\n' : ' ');
    }
  }
}

void save_checkpoint_file(const std::string& path, const ParamStore& store) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  save_checkpoint(out, store);
  if (!out) throw DataError("failed writing " + path);
}

void load_checkpoint(std::istream& in, ParamStore& store) {
  std::string header;
  if (!std::getline(in, header) || header != kHeader) {
    throw DataError("not a GRAPHAF-CKPT v1 checkpoint (header '" + header + "')");
  }
  std::map<std::string, Tensor> loaded;
  std::string word;
  while (in >> word) {
    if (word != "tensor") throw DataError("checkpoint: expected 'tensor', got '" + word + "'");
    std::string name;
    std::size_t rank = 0;
    if (!(in >> name >> rank)) throw DataError("checkpoint: malformed tensor line");
    const auto index = store.find(name);
    if (!index) throw DataError("checkpoint: unknown tensor '" + name + "'");
    const auto& expected = store[*index].value.shape();
    if (rank != expected.size()) {
      throw DataError("checkpoint: tensor '" + name + "' has rank " + std::to_string(rank) +
                      ", model expects " + std::to_string(expected.size()));
    }
    Tensor::Shape shape(rank);
    for (auto& d : shape) {
      if (!(in >> d)) throw DataError("checkpoint: malformed dims for '" + name + "'");
    }
    if (shape != expected) {
      throw DataError("checkpoint: tensor '" + name + "' has dims " + shape_string(shape) +
                      ", model expects " + shape_string(expected));
    }
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) {
      if (!(in >> v)) throw DataError("checkpoint: truncated values for '" + name + "'");
    }
    if (!loaded.emplace(name, Tensor(shape, std::move(values))).second) {
      throw DataError("checkpoint: duplicate tensor '" + name + "'");
    }
  }
  for (auto& p : store) {
    auto it = loaded.find(p.name);
    if (it == loaded.end()) throw DataError("checkpoint: missing tensor '" + p.name + "'");
    p.value = std::move(it->second);
  }
}

void load_checkpoint_file(const std::string& path, ParamStore& store) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  load_checkpoint(in, store);
}

}  // namespace graphaf
