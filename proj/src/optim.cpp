#include "valpat/optim.hpp"

namespace valpat {

void AdamW::attach(const nn::ParamList& params, Hyper hyper) {
  hyper_ = hyper;
  m_.clear();
  v_.clear();
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const nn::Param* p : params) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  t_ = 0;
}

void AdamW::step(const nn::ParamList& params, Scalar lr, Scalar weight_decay) {
  VALPAT_REQUIRE(params.size() == m_.size(), "AdamW: step called with ", params.size(),
                 " parameters, attached with ", m_.size());
  ++t_;
  const Scalar bias1 = 1.0 - std::pow(hyper_.beta1, static_cast<Scalar>(t_));
  const Scalar bias2 = 1.0 - std::pow(hyper_.beta2, static_cast<Scalar>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Param& p = *params[i];
    VALPAT_REQUIRE(p.value.rows() == m_[i].rows() && p.value.cols() == m_[i].cols(),
                   "AdamW: parameter ", p.name, " does not match its moment slot");
    m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * p.grad;
    v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * p.grad.cwiseProduct(p.grad);
    const Matrix m_hat = m_[i] / bias1;
    const Matrix v_hat = v_[i] / bias2;
    p.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + hyper_.eps)).matrix();
    if (p.decay && weight_decay > 0.0) {
      p.value -= lr * weight_decay * p.value;
    }
  }
}

void AdamW::restore(std::vector<Matrix> m, std::vector<Matrix> v, std::uint64_t t) {
  VALPAT_REQUIRE(m.size() == m_.size() && v.size() == m_.size(),
                 "AdamW: restore slot count mismatch");
  for (std::size_t i = 0; i < m_.size(); ++i) {
    VALPAT_REQUIRE(m[i].rows() == m_[i].rows() && m[i].cols() == m_[i].cols() &&
                       v[i].rows() == v_[i].rows() && v[i].cols() == v_[i].cols(),
                   "AdamW: restore shape mismatch at slot ", i);
  }
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

}  // namespace valpat
