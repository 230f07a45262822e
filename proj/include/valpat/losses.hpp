#pragma once

#include "valpat/common.hpp"
#include "valpat/nn.hpp"

namespace valpat {

/// Balancing scalars of the combined objective. tau is the fixed
/// instance-contrast temperature; tau_prime is the learnable cross-modal
/// temperature and is clamped to [0.01, 0.5] after every optimizer step.
struct LossWeights {
  Scalar alpha{0.2};
  Scalar beta{0.5};
  Scalar gamma{0.01};
  Scalar tau{0.07};
  Scalar tau_prime{0.07};

  static constexpr Scalar tau_prime_min = 0.01;
  static constexpr Scalar tau_prime_max = 0.5;
};

struct LossToggles {
  bool ssl{true};
  bool itc{true};
  bool mac{true};
};

struct LossBreakdown {
  Scalar l_ssl{0};
  Scalar l_i2t{0};
  Scalar l_t2i{0};
  Scalar l_mac_hard{0};
  Scalar l_mac_soft{0};
  Scalar total{0};
};

namespace detail {

template <class S>
void require_unit_rows(const MatRef<S>& m, const char* what, S tol = S(1e-3)) {
  for (Index r = 0; r < m.rows(); ++r) {
    const S norm = m.row(r).norm();
    VALPAT_REQUIRE(std::abs(norm - S(1)) <= tol, what, ": row ", r, " is not unit-norm (|x| = ",
                   norm, ")");
  }
}

/// Shared core of the queue-based InfoNCE losses. Per sample i the logits
/// are [q_i.k_i, q_i.n_1, ..., q_i.n_Kf] / tau and the loss is the softmax
/// cross-entropy with the positive in slot 0, averaged over the batch.
/// When grads are requested, dq and dtau receive d(mean loss)/dq and
/// d(mean loss)/dtau.
template <class S>
S info_nce(const MatRef<S>& q, const MatRef<S>& k, const MatRef<S>& negatives, S tau,
           MatrixX<S>* dq, S* dtau) {
  VALPAT_REQUIRE(q.rows() == k.rows() && q.cols() == k.cols(),
                 "contrastive loss: query/key shape mismatch");
  VALPAT_REQUIRE(negatives.rows() >= 1, "contrastive loss: needs at least one negative");
  VALPAT_REQUIRE(negatives.cols() == q.cols(), "contrastive loss: negative dim mismatch");
  VALPAT_REQUIRE(tau > S(0), "contrastive loss: temperature must be positive");
  require_unit_rows<S>(q, "contrastive loss (q)");
  require_unit_rows<S>(k, "contrastive loss (k)");
  require_unit_rows<S>(negatives, "contrastive loss (negatives)");

  const Index batch = q.rows();
  const Index kf = negatives.rows();
  if (dq != nullptr) *dq = MatrixX<S>::Zero(q.rows(), q.cols());
  if (dtau != nullptr) *dtau = S(0);

  S total = S(0);
  VectorX<S> sims(kf + 1);
  for (Index i = 0; i < batch; ++i) {
    sims[0] = q.row(i).dot(k.row(i));
    sims.tail(kf) = negatives * q.row(i).transpose();

    const VectorX<S> logits = sims / tau;
    const S max_logit = logits.maxCoeff();
    VectorX<S> probs = (logits.array() - max_logit).exp();
    const S denom = probs.sum();
    probs /= denom;
    total += std::log(denom) + max_logit - logits[0];

    if (dq != nullptr || dtau != nullptr) {
      VectorX<S> dlogits = probs;
      dlogits[0] -= S(1);
      dlogits /= static_cast<S>(batch);
      if (dq != nullptr) {
        dq->row(i) = (dlogits[0] / tau) * k.row(i);
        dq->row(i).noalias() += (dlogits.tail(kf) / tau).transpose() * negatives;
      }
      if (dtau != nullptr) *dtau -= dlogits.dot(sims) / (tau * tau);
    }
  }
  return total / static_cast<S>(batch);
}

}  // namespace detail

/// Instance-level contrastive loss against the negative queue (fixed
/// temperature). k and the negatives are gradient constants.
template <class S>
S ssl_contrastive_loss(const MatRef<S>& q, const MatRef<S>& k, const MatRef<S>& negatives, S tau) {
  return detail::info_nce<S>(q, k, negatives, tau, nullptr, nullptr);
}

template <class S>
struct SslGrad {
  S value;
  MatrixX<S> dq;
};

template <class S>
SslGrad<S> ssl_contrastive_loss_grad(const MatRef<S>& q, const MatRef<S>& k,
                                     const MatRef<S>& negatives, S tau) {
  SslGrad<S> out;
  out.value = detail::info_nce<S>(q, k, negatives, tau, &out.dq, nullptr);
  return out;
}

template <class S>
struct ItcValue {
  S i2t;
  S t2i;
};

/// Bidirectional image-text contrastive loss with dual negative queues and
/// the learnable temperature. Keys and negatives are gradient constants;
/// gradients flow through both query embeddings and tau_prime.
template <class S>
ItcValue<S> itc_loss(const MatRef<S>& q_img, const MatRef<S>& k_txt, const MatRef<S>& q_txt,
                     const MatRef<S>& k_img, const MatRef<S>& neg_txt, const MatRef<S>& neg_img,
                     S tau_prime) {
  return {detail::info_nce<S>(q_img, k_txt, neg_txt, tau_prime, nullptr, nullptr),
          detail::info_nce<S>(q_txt, k_img, neg_img, tau_prime, nullptr, nullptr)};
}

template <class S>
struct ItcGrad {
  ItcValue<S> value;
  MatrixX<S> dq_img;
  MatrixX<S> dq_txt;
  S dtau_prime;  // d(i2t + t2i)/dtau'
};

template <class S>
ItcGrad<S> itc_loss_grad(const MatRef<S>& q_img, const MatRef<S>& k_txt, const MatRef<S>& q_txt,
                         const MatRef<S>& k_img, const MatRef<S>& neg_txt,
                         const MatRef<S>& neg_img, S tau_prime) {
  ItcGrad<S> out;
  S dtau_i2t = S(0), dtau_t2i = S(0);
  out.value.i2t = detail::info_nce<S>(q_img, k_txt, neg_txt, tau_prime, &out.dq_img, &dtau_i2t);
  out.value.t2i = detail::info_nce<S>(q_txt, k_img, neg_img, tau_prime, &out.dq_txt, &dtau_t2i);
  out.dtau_prime = dtau_i2t + dtau_t2i;
  return out;
}

// ---------------------------------------------------------------------------
// Multi-attribute classification

/// Sigmoid attribute classifier with a momentum copy. The key branch
/// produces the cross-modal soft labels and receives no gradients.
struct AttributeClassifier {
  nn::Param weight_q;  // M x D
  nn::Param bias_q;    // M x 1
  Matrix weight_k;
  Matrix bias_k;

  enum class Branch { query, key };

  void init(Index num_attributes, Index embed_dim, Rng& rng, const std::string& name);
  void collect(nn::ParamList& out);
  void momentum_update_key(Scalar m);

  Index num_attributes() const { return weight_q.value.rows(); }

  /// Caches the input for the query branch so mac gradients can be pushed
  /// back through it.
  Matrix forward(const Matrix& embeddings, Branch branch);
  /// dprobs -> gradient w.r.t. the query-branch input embeddings;
  /// accumulates weight/bias grads.
  Matrix backward(const Matrix& dprobs);

  Matrix emb_q_;
  Matrix probs_q_;
};

/// sigma(W e + z) for the selected branch; outputs strictly inside (0,1).
Matrix attribute_logits(AttributeClassifier& clf, const Matrix& embeddings,
                        AttributeClassifier::Branch branch);

namespace detail {

constexpr double kProbClamp = 1e-7;

template <class S>
void require_probability_matrix(const MatRef<S>& p, const char* what) {
  for (Index i = 0; i < p.rows(); ++i)
    for (Index j = 0; j < p.cols(); ++j)
      VALPAT_REQUIRE(p(i, j) >= S(0) && p(i, j) <= S(1), what, ": entry (", i, ",", j,
                     ") outside [0,1]: ", p(i, j));
}

template <class S>
S clamp_prob(S p) {
  return std::clamp(p, S(kProbClamp), S(1) - S(kProbClamp));
}

/// Weighted two-branch BCE, batch mean:
///   (1/B) sum_i sum_j w_j [ bce(p_img_ij, t_img_ij) + bce(p_txt_ij, t_txt_ij) ]
/// with probabilities clamped before the logs. Gradients are zero where the
/// clamp binds.
template <class S>
S paired_weighted_bce(const MatRef<S>& p_img, const MatRef<S>& p_txt, const MatRef<S>& t_img,
                      const MatRef<S>& t_txt, const VecRef<S>& w, MatrixX<S>* dp_img,
                      MatrixX<S>* dp_txt) {
  const Index batch = p_img.rows();
  const Index m = p_img.cols();
  VALPAT_REQUIRE(batch > 0 && m > 0, "mac loss: empty batch or attribute set");
  VALPAT_REQUIRE(p_txt.rows() == batch && p_txt.cols() == m && t_img.rows() == batch &&
                     t_img.cols() == m && t_txt.rows() == batch && t_txt.cols() == m,
                 "mac loss: shape mismatch");
  VALPAT_REQUIRE(w.size() == m, "mac loss: weight vector length ", w.size(), " != M=", m);
  VALPAT_REQUIRE((w.array() > S(0)).all(), "mac loss: weights must be positive");
  require_probability_matrix<S>(p_img, "mac loss (p_img)");
  require_probability_matrix<S>(p_txt, "mac loss (p_txt)");
  require_probability_matrix<S>(t_img, "mac loss (targets for image branch)");
  require_probability_matrix<S>(t_txt, "mac loss (targets for text branch)");

  if (dp_img != nullptr) *dp_img = MatrixX<S>::Zero(batch, m);
  if (dp_txt != nullptr) *dp_txt = MatrixX<S>::Zero(batch, m);

  S total = S(0);
  auto accumulate = [&](const MatRef<S>& p, const MatRef<S>& t, MatrixX<S>* dp) {
    for (Index i = 0; i < batch; ++i) {
      for (Index j = 0; j < m; ++j) {
        const S pc = clamp_prob(p(i, j));
        const S y = t(i, j);
        total -= w[j] * (y * std::log(pc) + (S(1) - y) * std::log(S(1) - pc));
        if (dp != nullptr && pc == p(i, j)) {
          (*dp)(i, j) = w[j] * (pc - y) / (pc * (S(1) - pc) * static_cast<S>(batch));
        }
      }
    }
  };
  accumulate(p_img, t_img, dp_img);
  accumulate(p_txt, t_txt, dp_txt);
  return total / static_cast<S>(batch);
}

}  // namespace detail

/// Hard-label attribute loss: mined multi-hot labels supervise both
/// modalities, weighted per attribute.
template <class S>
S mac_hard_loss(const MatRef<S>& p_img, const MatRef<S>& p_txt, const MatRef<S>& y,
                const VecRef<S>& w) {
  for (Index i = 0; i < y.rows(); ++i)
    for (Index j = 0; j < y.cols(); ++j)
      VALPAT_REQUIRE(y(i, j) == S(0) || y(i, j) == S(1), "mac_hard_loss: label (", i, ",", j,
                     ") not in {0,1}");
  return detail::paired_weighted_bce<S>(p_img, p_txt, y, y, w, nullptr, nullptr);
}

template <class S>
struct MacGrad {
  S value;
  MatrixX<S> dp_img;
  MatrixX<S> dp_txt;
};

template <class S>
MacGrad<S> mac_hard_loss_grad(const MatRef<S>& p_img, const MatRef<S>& p_txt, const MatRef<S>& y,
                              const VecRef<S>& w) {
  MacGrad<S> out;
  out.value = detail::paired_weighted_bce<S>(p_img, p_txt, y, y, w, &out.dp_img, &out.dp_txt);
  return out;
}

/// Soft-label attribute loss with cross-modal targets: the text-branch
/// momentum prediction supervises the image branch and vice versa. The
/// targets are gradient constants.
template <class S>
S mac_soft_loss(const MatRef<S>& p_img, const MatRef<S>& p_txt, const MatRef<S>& yhat_img,
                const MatRef<S>& yhat_txt, const VecRef<S>& w) {
  return detail::paired_weighted_bce<S>(p_img, p_txt, yhat_txt, yhat_img, w, nullptr, nullptr);
}

template <class S>
MacGrad<S> mac_soft_loss_grad(const MatRef<S>& p_img, const MatRef<S>& p_txt,
                              const MatRef<S>& yhat_img, const MatRef<S>& yhat_txt,
                              const VecRef<S>& w) {
  MacGrad<S> out;
  out.value =
      detail::paired_weighted_bce<S>(p_img, p_txt, yhat_txt, yhat_img, w, &out.dp_img, &out.dp_txt);
  return out;
}

/// Combined objective:
///   total = L_I + beta (L_I2T + L_T2I) + gamma ((1-alpha) L_A^H + alpha L_A^S)
/// with disabled parts contributing (and reported as) exactly zero.
LossBreakdown total_loss(const LossBreakdown& parts, const LossWeights& weights,
                         const LossToggles& toggles);

}  // namespace valpat
