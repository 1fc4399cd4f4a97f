#ifndef ZRNMT_PARAMS_HPP
#define ZRNMT_PARAMS_HPP

#include <cstdint>
#include <map>
#include <string>

#include "zrnmt/tensor.hpp"

namespace zrnmt {

// Named parameter tensors for one agent. Shapes are fixed at creation;
// assigning a differently shaped tensor to an existing name throws.
// The ordered map gives every iteration (updates, serialization, norms)
// a fixed, reproducible order.
class ParamStore {
public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : rng_seed_(seed) {}

  void create(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) > 0; }

  const std::map<std::string, Tensor>& entries() const { return entries_; }
  std::map<std::string, Tensor>& entries() { return entries_; }

  std::uint64_t rng_seed() const { return rng_seed_; }
  void set_rng_seed(std::uint64_t s) { rng_seed_ = s; }

  std::size_t param_count() const;
  bool all_finite() const;

  bool operator==(const ParamStore& o) const {
    return rng_seed_ == o.rng_seed_ && bitwise_equal(o);
  }
  bool bitwise_equal(const ParamStore& o) const;

  // Text checkpoint, one parameter per record, values in C99 hex-float so the
  // round trip is exact at 64-bit.
  void save(const std::string& path) const;
  static ParamStore load(const std::string& path);

private:
  std::map<std::string, Tensor> entries_;
  std::uint64_t rng_seed_ = 0;
};

// Gradient accumulator keyed like a ParamStore.
using GradMap = std::map<std::string, Tensor>;

GradMap zero_like(const ParamStore& store);
void grad_axpy(GradMap& acc, double s, const GradMap& g);
double grad_norm(const GradMap& g);
// Scales g in place so its global norm is at most max_norm.
void clip_global_norm(GradMap& g, double max_norm);
// theta += lr * g for every named entry present in g.
void apply_ascent(ParamStore& store, const GradMap& g, double lr);

}  // namespace zrnmt

#endif
