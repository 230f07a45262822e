#include "valpat/losses.hpp"

namespace valpat {

void AttributeClassifier::init(Index num_attributes, Index embed_dim, Rng& rng,
                               const std::string& name) {
  const Scalar stddev = std::sqrt(2.0 / static_cast<Scalar>(num_attributes + embed_dim));
  weight_q.name = name + ".weight";
  weight_q.init_normal(num_attributes, embed_dim, stddev, rng);
  bias_q.name = name + ".bias";
  bias_q.decay = false;
  bias_q.init_zero(num_attributes, 1);
  weight_k = weight_q.value;
  bias_k = bias_q.value;
}

void AttributeClassifier::collect(nn::ParamList& out) {
  out.push_back(&weight_q);
  out.push_back(&bias_q);
}

void AttributeClassifier::momentum_update_key(Scalar m) {
  VALPAT_REQUIRE(m >= 0.0 && m <= 1.0, "AttributeClassifier: momentum out of [0,1]");
  weight_k = m * weight_k + (1.0 - m) * weight_q.value;
  bias_k = m * bias_k + (1.0 - m) * bias_q.value;
}

Matrix AttributeClassifier::forward(const Matrix& embeddings, Branch branch) {
  VALPAT_REQUIRE(embeddings.allFinite(), "attribute_logits: non-finite embeddings");
  const Matrix& w = branch == Branch::query ? weight_q.value : weight_k;
  const Matrix& z = branch == Branch::query ? bias_q.value : bias_k;
  VALPAT_REQUIRE(embeddings.cols() == w.cols(), "attribute_logits: embedding dim ",
                 embeddings.cols(), " != classifier dim ", w.cols());
  Matrix logits = embeddings * w.transpose();
  logits.rowwise() += z.col(0).transpose();
  Matrix probs = logits.unaryExpr([](Scalar s) { return 1.0 / (1.0 + std::exp(-s)); });
  if (branch == Branch::query) {
    emb_q_ = embeddings;
    probs_q_ = probs;
  }
  return probs;
}

Matrix AttributeClassifier::backward(const Matrix& dprobs) {
  VALPAT_REQUIRE(dprobs.rows() == probs_q_.rows() && dprobs.cols() == probs_q_.cols(),
                 "AttributeClassifier: backward shape mismatch");
  // dL/dlogits = dL/dp * sigma'(logit) with sigma' = p(1-p).
  const Matrix dlogits =
      dprobs.cwiseProduct(probs_q_.cwiseProduct(Matrix::Ones(probs_q_.rows(), probs_q_.cols()) - probs_q_));
  weight_q.grad.noalias() += dlogits.transpose() * emb_q_;
  bias_q.grad.col(0) += dlogits.colwise().sum().transpose();
  return dlogits * weight_q.value;
}

Matrix attribute_logits(AttributeClassifier& clf, const Matrix& embeddings,
                        AttributeClassifier::Branch branch) {
  return clf.forward(embeddings, branch);
}

LossBreakdown total_loss(const LossBreakdown& parts, const LossWeights& weights,
                         const LossToggles& toggles) {
  VALPAT_REQUIRE(toggles.ssl || toggles.itc || toggles.mac,
                 "total_loss: all objectives disabled");
  VALPAT_REQUIRE(weights.alpha >= 0.0 && weights.alpha <= 1.0, "total_loss: alpha out of [0,1]");
  VALPAT_REQUIRE(weights.beta >= 0.0 && weights.gamma >= 0.0,
                 "total_loss: beta and gamma must be non-negative");

  LossBreakdown out;
  out.l_ssl = toggles.ssl ? parts.l_ssl : 0.0;
  out.l_i2t = toggles.itc ? parts.l_i2t : 0.0;
  out.l_t2i = toggles.itc ? parts.l_t2i : 0.0;
  out.l_mac_hard = toggles.mac ? parts.l_mac_hard : 0.0;
  out.l_mac_soft = toggles.mac ? parts.l_mac_soft : 0.0;

  auto require_finite = [](Scalar v, const char* what) {
    VALPAT_REQUIRE(std::isfinite(v), "total_loss: ", what, " is not finite");
  };
  require_finite(out.l_ssl, "l_ssl");
  require_finite(out.l_i2t, "l_i2t");
  require_finite(out.l_t2i, "l_t2i");
  require_finite(out.l_mac_hard, "l_mac_hard");
  require_finite(out.l_mac_soft, "l_mac_soft");

  out.total = 0.0;
  if (toggles.ssl) out.total += out.l_ssl;
  if (toggles.itc) out.total += weights.beta * (out.l_i2t + out.l_t2i);
  if (toggles.mac) {
    out.total +=
        weights.gamma * ((1.0 - weights.alpha) * out.l_mac_hard + weights.alpha * out.l_mac_soft);
  }
  return out;
}

}  // namespace valpat
