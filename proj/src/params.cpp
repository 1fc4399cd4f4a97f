#include "zrnmt/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace zrnmt {

void ParamStore::create(const std::string& name, Tensor t) {
  auto it = entries_.find(name);
  if (it != entries_.end()) {
    if (!it->second.same_shape(t))
      throw std::invalid_argument("ParamStore: shape change for '" + name + "'");
    it->second = std::move(t);
    return;
  }
  entries_.emplace(name, std::move(t));
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& [name, t] : entries_)
    if (!t.all_finite()) return false;
  return true;
}

bool ParamStore::bitwise_equal(const ParamStore& o) const {
  if (entries_.size() != o.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = o.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || !a->second.same_shape(b->second)) return false;
    if (std::memcmp(a->second.v.data(), b->second.v.data(),
                    a->second.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

void ParamStore::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("ParamStore: cannot write " + path);
  out << "zrckpt v1\n";
  out << "rng_seed " << rng_seed_ << "\n";
  out << "params " << entries_.size() << "\n";
  char buf[64];
  for (const auto& [name, t] : entries_) {
    out << name << " " << t.rows << " " << t.cols << "\n";
    for (std::size_t i = 0; i < t.v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", t.v[i]);
      out << buf << (i + 1 == t.v.size() ? "\n" : " ");
    }
  }
  if (!out) throw std::runtime_error("ParamStore: write failed for " + path);
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ParamStore: cannot read " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "zrckpt" || version != "v1")
    throw std::runtime_error("ParamStore: bad checkpoint header in " + path);
  std::string key;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  in >> key >> seed;
  if (key != "rng_seed") throw std::runtime_error("ParamStore: bad checkpoint in " + path);
  in >> key >> count;
  if (key != "params") throw std::runtime_error("ParamStore: bad checkpoint in " + path);

  ParamStore store(seed);
  for (std::size_t p = 0; p < count; ++p) {
    std::string name;
    int rows = 0, cols = 0;
    in >> name >> rows >> cols;
    if (!in || rows <= 0 || cols <= 0)
      throw std::runtime_error("ParamStore: truncated checkpoint " + path);
    Tensor t(rows, cols);
    std::string tok;
    for (std::size_t i = 0; i < t.v.size(); ++i) {
      in >> tok;
      if (!in) throw std::runtime_error("ParamStore: truncated values in " + path);
      char* end = nullptr;
      t.v[i] = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str()) throw std::runtime_error("ParamStore: bad value '" + tok + "'");
    }
    store.create(name, std::move(t));
  }
  return store;
}

GradMap zero_like(const ParamStore& store) {
  GradMap g;
  for (const auto& [name, t] : store.entries()) g.emplace(name, Tensor(t.rows, t.cols));
  return g;
}

void grad_axpy(GradMap& acc, double s, const GradMap& g) {
  for (const auto& [name, t] : g) {
    auto it = acc.find(name);
    if (it == acc.end()) it = acc.emplace(name, Tensor(t.rows, t.cols)).first;
    axpy(it->second, s, t);
  }
}

double grad_norm(const GradMap& g) {
  double ss = 0.0;
  for (const auto& [name, t] : g) ss += t.sum_squares();
  return std::sqrt(ss);
}

void clip_global_norm(GradMap& g, double max_norm) {
  const double norm = grad_norm(g);
  if (norm <= max_norm || norm == 0.0) return;
  const double s = max_norm / norm;
  for (auto& [name, t] : g)
    for (double& x : t.v) x *= s;
}

void apply_ascent(ParamStore& store, const GradMap& g, double lr) {
  if (lr == 0.0) return;
  for (const auto& [name, t] : g) axpy(store.at(name), lr, t);
}

}  // namespace zrnmt
