#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pointlab/tape.hpp"

namespace pointlab {

enum class Constraint { kFree, kNonnegative, kPositive };

// Constrained entries store a raw unconstrained value; the exposed value is
// softplus(raw), so optimizer steps can never violate the tag.
struct ParamEntry {
  std::vector<int> shape;
  std::vector<double> raw;
  std::vector<double> grad;  // d(loss)/d(raw)
  Constraint constraint = Constraint::kFree;
};

double softplus_scalar(double x);
double softplus_inverse(double y);

class ParamStore {
 public:
  void add(const std::string& name, std::vector<int> shape,
           Constraint c = Constraint::kFree, double raw_init = 0.0);
  // Xavier-uniform initialization of a free entry.
  void add_xavier(const std::string& name, std::vector<int> shape, int fan_in,
                  int fan_out, std::mt19937_64& rng);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  ParamEntry& entry(const std::string& name);
  const ParamEntry& entry(const std::string& name) const;
  std::map<std::string, ParamEntry>& entries() { return entries_; }
  const std::map<std::string, ParamEntry>& entries() const { return entries_; }

  // Exposed (constraint-respecting) values of one entry.
  std::vector<double> exposed(const std::string& name) const;
  // Sets raw values so that the exposed values equal `values`.
  void set_exposed(const std::string& name, const std::vector<double>& values);

  void zero_grad();
  std::size_t num_scalars() const;

  std::string to_json() const;
  static ParamStore from_json(const std::string& text);

 private:
  std::map<std::string, ParamEntry> entries_;
};

// Lazily places one tape leaf per raw scalar and exposes constrained views.
class TapeBinding {
 public:
  TapeBinding(ad::Tape& tape, ParamStore& store) : tape_(&tape), store_(&store) {}

  const std::vector<ad::Value>& vec(const std::string& name);
  ad::Value scalar(const std::string& name);

  // Accumulates d(loss)/d(raw) into the store's gradient slots.
  // Throws if a non-finite gradient is produced, naming the parameter.
  void scatter_gradients(const std::vector<double>& adjoint);

 private:
  ad::Tape* tape_;
  ParamStore* store_;
  std::map<std::string, std::vector<ad::Value>> exposed_;
  std::map<std::string, int> leaf_start_;
};

struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  std::int64_t step = 0;
};

// Standard Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
void adam_step(ParamStore& params, double lr, AdamState& state);

}  // namespace pointlab
