#pragma once

#include <cmath>
#include <unordered_map>

#include "itvreg/encoder.hpp"

namespace itvreg {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over embedding rows. Moment buffers exist only for rows that have
/// received a gradient; rows absent from a step are left untouched (no decay).
/// Bias correction uses the global step count.
template <typename Scalar>
class SparseAdam {
public:
  explicit SparseAdam(AdamConfig config = {}) : config_(config) {}

  void step(Table<Scalar>& table, const SparseGrad<Scalar>& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    for (const auto& [tok, g] : grad) {
      auto [it, fresh] = moments_.try_emplace(tok);
      auto& [m, v] = it->second;
      if (fresh) {
        m = Vec<Scalar>::Zero(g.size());
        v = Vec<Scalar>::Zero(g.size());
      }
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      if (config_.learning_rate == 0.0) continue;
      const auto lr = static_cast<Scalar>(config_.learning_rate);
      const Vec<Scalar> m_hat = m / static_cast<Scalar>(bc1);
      const Vec<Scalar> v_hat = v / static_cast<Scalar>(bc2);
      const Vec<Scalar> update =
          lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + static_cast<Scalar>(config_.eps)).matrix());
      table.row(tok) -= update.transpose();
    }
  }

  long steps() const { return t_; }
  std::size_t tracked_rows() const { return moments_.size(); }

private:
  AdamConfig config_;
  long t_ = 0;
  std::unordered_map<TokenId, std::pair<Vec<Scalar>, Vec<Scalar>>> moments_;
};

}  // namespace itvreg
