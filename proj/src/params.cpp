#include "pointlab/params.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace pointlab {

double softplus_scalar(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double softplus_inverse(double y) {
  if (y <= 0.0) throw std::invalid_argument("softplus_inverse: y must be > 0");
  // log(e^y - 1) = y + log(1 - e^-y)
  return y + std::log(-std::expm1(-y));
}

static std::size_t shape_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

void ParamStore::add(const std::string& name, std::vector<int> shape,
                     Constraint c, double raw_init) {
  if (entries_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  ParamEntry e;
  const std::size_t n = shape_count(shape);
  e.shape = std::move(shape);
  e.raw.assign(n, raw_init);
  e.grad.assign(n, 0.0);
  e.constraint = c;
  entries_.emplace(name, std::move(e));
}

void ParamStore::add_xavier(const std::string& name, std::vector<int> shape,
                            int fan_in, int fan_out, std::mt19937_64& rng) {
  add(name, std::move(shape), Constraint::kFree, 0.0);
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (double& x : entries_.at(name).raw) x = u(rng);
}

ParamEntry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::vector<double> ParamStore::exposed(const std::string& name) const {
  const ParamEntry& e = entry(name);
  std::vector<double> out(e.raw);
  if (e.constraint != Constraint::kFree)
    for (double& x : out) x = softplus_scalar(x);
  return out;
}

void ParamStore::set_exposed(const std::string& name, const std::vector<double>& values) {
  ParamEntry& e = entry(name);
  if (values.size() != e.raw.size())
    throw std::invalid_argument("set_exposed: size mismatch for " + name);
  for (std::size_t i = 0; i < values.size(); ++i)
    e.raw[i] = e.constraint == Constraint::kFree ? values[i] : softplus_inverse(values[i]);
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) std::fill(e.grad.begin(), e.grad.end(), 0.0);
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.raw.size();
  return n;
}

std::string ParamStore::to_json() const {
  nlohmann::json j;
  for (const auto& [name, e] : entries_) {
    j[name] = {{"shape", e.shape},
               {"values", e.raw},
               {"constraint", static_cast<int>(e.constraint)}};
  }
  return j.dump();
}

ParamStore ParamStore::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ParamStore ps;
  for (auto it = j.begin(); it != j.end(); ++it) {
    ParamEntry e;
    e.shape = it.value().at("shape").get<std::vector<int>>();
    e.raw = it.value().at("values").get<std::vector<double>>();
    e.grad.assign(e.raw.size(), 0.0);
    e.constraint = static_cast<Constraint>(it.value().value("constraint", 0));
    ps.entries_.emplace(it.key(), std::move(e));
  }
  return ps;
}

const std::vector<ad::Value>& TapeBinding::vec(const std::string& name) {
  auto it = exposed_.find(name);
  if (it != exposed_.end()) return it->second;
  ParamEntry& e = store_->entry(name);
  leaf_start_[name] = static_cast<int>(tape_->size());
  std::vector<ad::Value> leaves;
  leaves.reserve(e.raw.size());
  for (double x : e.raw) leaves.push_back(ad::constant(*tape_, x));
  if (e.constraint != Constraint::kFree)
    for (ad::Value& v : leaves) v = ad::softplus(v);
  return exposed_.emplace(name, std::move(leaves)).first->second;
}

ad::Value TapeBinding::scalar(const std::string& name) {
  const auto& v = vec(name);
  if (v.size() != 1) throw std::invalid_argument("scalar() on non-scalar " + name);
  return v[0];
}

void TapeBinding::scatter_gradients(const std::vector<double>& adjoint) {
  for (const auto& [name, start] : leaf_start_) {
    ParamEntry& e = store_->entry(name);
    for (std::size_t i = 0; i < e.raw.size(); ++i) {
      const double g = adjoint[start + static_cast<int>(i)];
      if (!std::isfinite(g))
        throw std::runtime_error("non-finite gradient for parameter " + name);
      e.grad[i] += g;
    }
  }
}

void adam_step(ParamStore& params, double lr, AdamState& state) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be > 0");
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  state.step += 1;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (auto& [name, e] : params.entries()) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != e.raw.size()) m.assign(e.raw.size(), 0.0);
    if (v.size() != e.raw.size()) v.assign(e.raw.size(), 0.0);
    for (std::size_t i = 0; i < e.raw.size(); ++i) {
      const double g = e.grad[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      e.raw[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }
}

}  // namespace pointlab
