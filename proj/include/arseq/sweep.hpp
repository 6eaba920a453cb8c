#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "arseq/config.hpp"
#include "arseq/eval.hpp"
#include "arseq/pipeline.hpp"

namespace arseq {

struct SweepPoint {
  double lambda = 0.1;
  std::optional<double> gamma;  // unset: mode default
  double delta = 0.15;
  ImportanceMode importance = ImportanceMode::local;
};

struct SweepGrid {
  std::vector<double> lambdas;
  std::vector<std::optional<double>> gammas;
  std::vector<double> deltas;
  std::vector<ImportanceMode> modes;

  /// Cartesian product in (mode, lambda, gamma, delta) order.
  std::vector<SweepPoint> points() const;
};

struct SweepRow {
  SweepPoint point;
  double gamma = 0.0;  // effective
  bool ok = false;
  std::string error;
  double perplexity = 0.0;
  AffectWordReport affect;
};

std::string to_json(const SweepRow& row);

/// Trains and evaluates one model per point on the prepared data. Responses
/// are decoded for eval_samples seeded validation inputs (training inputs
/// when there is no validation set). A failing run is recorded and the sweep
/// moves on.
std::vector<SweepRow> sweep(const RunConfig& base, const PreparedData& data, const std::vector<SweepPoint>& points,
                            const std::function<void(const SweepRow&)>& on_row = {});

/// One sweep run; throws on failure.
SweepRow sweep_run(const RunConfig& base, const PreparedData& data, const SweepPoint& point);

}  // namespace arseq
