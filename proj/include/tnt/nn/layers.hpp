#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tnt/common/error.hpp"
#include "tnt/common/rng.hpp"
#include "tnt/core/tensor.hpp"

namespace tnt::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value;
};

namespace detail {

inline std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

/// Unfolds (C,H,W) into (C*k*k, oh*ow) patches; out-of-bounds taps are zero.
template <typename T>
void im2col(const T* im, std::size_t C, std::size_t H, std::size_t W, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, T* cols) {
  const std::size_t plane = oh * ow;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        T* row = cols + ((c * k + ki) * k + kj) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) {
            for (std::size_t ox = 0; ox < ow; ++ox) row[oy * ow + ox] = T(0);
            continue;
          }
          const T* src = im + (c * H + static_cast<std::size_t>(iy)) * W;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            row[oy * ow + ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds (C*k*k, oh*ow) columns back onto (C,H,W).
template <typename T>
void col2im(const T* cols, std::size_t C, std::size_t H, std::size_t W, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, T* im) {
  const std::size_t plane = oh * ow;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const T* row = cols + ((c * k + ki) * k + kj) * plane;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
          T* dst = im + (c * H + static_cast<std::size_t>(iy)) * W;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(W)) dst[ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
class Layer {
public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool training) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    (void)prefix;
    (void)out;
  }
  virtual void collect_buffers(const std::string& prefix, std::vector<BufferRef<T>>& out) {
    (void)prefix;
    (void)out;
  }
  virtual const char* kind() const = 0;
};

template <typename T>
class Dense final : public Layer<T> {
public:
  Dense(std::size_t in, std::size_t out, Rng& rng)
      : in_(in), out_(out), w_({out, in}), b_({out}), dw_({out, in}), db_({out}) {
    const T std = std::sqrt(T(2) / static_cast<T>(in));
    for (auto& v : w_.vec()) v = static_cast<T>(rng.normal()) * std;
  }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    if (x.rank() != 2 || x.dim(1) != in_) throw ShapeError("Dense: expected (N," + std::to_string(in_) + ")");
    x_ = x;
    const std::size_t n = x.dim(0);
    Tensor<T> y({n, out_});
    ConstMatMap<T> xm(x.data(), n, in_);
    ConstMatMap<T> wm(w_.data(), out_, in_);
    MatMap<T> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out_; ++j) y.at2(i, j) += b_[j];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const std::size_t n = x_.dim(0);
    ConstMatMap<T> gm(g.data(), n, out_);
    ConstMatMap<T> xm(x_.data(), n, in_);
    MatMap<T> dwm(dw_.data(), out_, in_);
    dwm.noalias() += gm.transpose() * xm;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out_; ++j) db_[j] += g.at2(i, j);
    Tensor<T> dx({n, in_});
    MatMap<T> dxm(dx.data(), n, in_);
    ConstMatMap<T> wm(w_.data(), out_, in_);
    dxm.noalias() = gm * wm;
    return dx;
  }

  void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
    out.push_back({p + ".weight", &w_, &dw_});
    out.push_back({p + ".bias", &b_, &db_});
  }

  const char* kind() const override { return "dense"; }

private:
  std::size_t in_, out_;
  Tensor<T> w_, b_, dw_, db_;
  Tensor<T> x_;
};

template <typename T>
class Conv2d final : public Layer<T> {
public:
  Conv2d(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride, std::size_t pad,
         Rng& rng)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
        w_({cout, cin, k, k}), b_({cout}), dw_({cout, cin, k, k}), db_({cout}) {
    const T std = std::sqrt(T(2) / static_cast<T>(cin * k * k));
    for (auto& v : w_.vec()) v = static_cast<T>(rng.normal()) * std;
  }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    check_input(x);
    x_ = x;
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    oh_ = detail::conv_out_dim(h, k_, stride_, pad_);
    ow_ = detail::conv_out_dim(w, k_, stride_, pad_);
    Tensor<T> y({n, cout_, oh_, ow_});
    const std::size_t cols_rows = cin_ * k_ * k_, plane = oh_ * ow_;
    cols_.assign(cols_rows * plane, T(0));
    ConstMatMap<T> wm(w_.data(), cout_, cols_rows);
    for (std::size_t i = 0; i < n; ++i) {
      detail::im2col(x.data() + i * cin_ * h * w, cin_, h, w, k_, stride_, pad_, oh_, ow_, cols_.data());
      ConstMatMap<T> cm(cols_.data(), cols_rows, plane);
      MatMap<T> ym(y.data() + i * cout_ * plane, cout_, plane);
      ym.noalias() = wm * cm;
      for (std::size_t c = 0; c < cout_; ++c) ym.row(c).array() += b_[c];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const std::size_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const std::size_t cols_rows = cin_ * k_ * k_, plane = oh_ * ow_;
    Tensor<T> dx({n, cin_, h, w});
    MatMap<T> dwm(dw_.data(), cout_, cols_rows);
    ConstMatMap<T> wm(w_.data(), cout_, cols_rows);
    std::vector<T> dcols(cols_rows * plane);
    for (std::size_t i = 0; i < n; ++i) {
      detail::im2col(x_.data() + i * cin_ * h * w, cin_, h, w, k_, stride_, pad_, oh_, ow_, cols_.data());
      ConstMatMap<T> gm(g.data() + i * cout_ * plane, cout_, plane);
      ConstMatMap<T> cm(cols_.data(), cols_rows, plane);
      dwm.noalias() += gm * cm.transpose();
      for (std::size_t c = 0; c < cout_; ++c) db_[c] += gm.row(c).sum();
      MatMap<T> dcm(dcols.data(), cols_rows, plane);
      dcm.noalias() = wm.transpose() * gm;
      detail::col2im(dcols.data(), cin_, h, w, k_, stride_, pad_, oh_, ow_, dx.data() + i * cin_ * h * w);
    }
    return dx;
  }

  void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
    out.push_back({p + ".weight", &w_, &dw_});
    out.push_back({p + ".bias", &b_, &db_});
  }

  const char* kind() const override { return "conv"; }

private:
  void check_input(const Tensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != cin_) throw ShapeError("Conv2d: expected (N,C,H,W) with C=" + std::to_string(cin_));
  }

  std::size_t cin_, cout_, k_, stride_, pad_;
  std::size_t oh_ = 0, ow_ = 0;
  Tensor<T> w_, b_, dw_, db_;
  Tensor<T> x_;
  std::vector<T> cols_;
};

/// Fractionally strided convolution. Forward is the adjoint of a Conv2d with
/// the same geometry, so output size is (in-1)*stride - 2*pad + k.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
public:
  ConvTranspose2d(std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride,
                  std::size_t pad, Rng& rng)
      : cin_(cin), cout_(cout), k_(k), stride_(stride), pad_(pad),
        w_({cin, cout, k, k}), b_({cout}), dw_({cin, cout, k, k}), db_({cout}) {
    const T std = std::sqrt(T(2) / static_cast<T>(cin * k * k));
    for (auto& v : w_.vec()) v = static_cast<T>(rng.normal()) * std;
  }

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    if (x.rank() != 4 || x.dim(1) != cin_)
      throw ShapeError("ConvTranspose2d: expected (N,C,H,W) with C=" + std::to_string(cin_));
    x_ = x;
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    oh_ = (h - 1) * stride_ + k_ - 2 * pad_;
    ow_ = (w - 1) * stride_ + k_ - 2 * pad_;
    Tensor<T> y({n, cout_, oh_, ow_});
    const std::size_t cols_rows = cout_ * k_ * k_, plane = h * w;
    std::vector<T> cols(cols_rows * plane);
    ConstMatMap<T> wm(w_.data(), cin_, cols_rows);
    for (std::size_t i = 0; i < n; ++i) {
      ConstMatMap<T> xm(x.data() + i * cin_ * plane, cin_, plane);
      MatMap<T> cm(cols.data(), cols_rows, plane);
      cm.noalias() = wm.transpose() * xm;
      T* out = y.data() + i * cout_ * oh_ * ow_;
      detail::col2im(cols.data(), cout_, oh_, ow_, k_, stride_, pad_, h, w, out);
      for (std::size_t c = 0; c < cout_; ++c) {
        T* ch = out + c * oh_ * ow_;
        for (std::size_t j = 0; j < oh_ * ow_; ++j) ch[j] += b_[c];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const std::size_t n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const std::size_t cols_rows = cout_ * k_ * k_, plane = h * w;
    Tensor<T> dx({n, cin_, h, w});
    std::vector<T> gcols(cols_rows * plane);
    ConstMatMap<T> wm(w_.data(), cin_, cols_rows);
    MatMap<T> dwm(dw_.data(), cin_, cols_rows);
    for (std::size_t i = 0; i < n; ++i) {
      const T* gp = g.data() + i * cout_ * oh_ * ow_;
      detail::im2col(gp, cout_, oh_, ow_, k_, stride_, pad_, h, w, gcols.data());
      ConstMatMap<T> gcm(gcols.data(), cols_rows, plane);
      MatMap<T> dxm(dx.data() + i * cin_ * plane, cin_, plane);
      dxm.noalias() = wm * gcm;
      ConstMatMap<T> xm(x_.data() + i * cin_ * plane, cin_, plane);
      dwm.noalias() += xm * gcm.transpose();
      for (std::size_t c = 0; c < cout_; ++c) {
        const T* ch = gp + c * oh_ * ow_;
        T acc = T(0);
        for (std::size_t j = 0; j < oh_ * ow_; ++j) acc += ch[j];
        db_[c] += acc;
      }
    }
    return dx;
  }

  void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
    out.push_back({p + ".weight", &w_, &dw_});
    out.push_back({p + ".bias", &b_, &db_});
  }

  const char* kind() const override { return "convt"; }

private:
  std::size_t cin_, cout_, k_, stride_, pad_;
  std::size_t oh_ = 0, ow_ = 0;
  Tensor<T> w_, b_, dw_, db_;
  Tensor<T> x_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
public:
  explicit BatchNorm2d(std::size_t c, T momentum = T(0.1), T eps = T(1e-5))
      : c_(c), momentum_(momentum), eps_(eps),
        gamma_({c}, T(1)), beta_({c}), dgamma_({c}), dbeta_({c}),
        running_mean_({c}, T(0)), running_var_({c}, T(1)) {}

  Tensor<T> forward(const Tensor<T>& x, bool training) override {
    if (x.rank() != 4 || x.dim(1) != c_) throw ShapeError("BatchNorm2d: channel mismatch");
    training_ = training;
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const std::size_t m = n * h * w;
    xhat_ = Tensor<T>(x.shape());
    invstd_ = Tensor<T>({c_});
    Tensor<T> y(x.shape());
    for (std::size_t c = 0; c < c_; ++c) {
      T mean, var;
      if (training) {
        T acc = T(0);
        for_each_c(x, c, [&](T v) { acc += v; });
        mean = acc / static_cast<T>(m);
        T vacc = T(0);
        for_each_c(x, c, [&](T v) { vacc += (v - mean) * (v - mean); });
        var = vacc / static_cast<T>(m);
        const T unbiased = m > 1 ? vacc / static_cast<T>(m - 1) : var;
        running_mean_[c] = (T(1) - momentum_) * running_mean_[c] + momentum_ * mean;
        running_var_[c] = (T(1) - momentum_) * running_var_[c] + momentum_ * unbiased;
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const T inv = T(1) / std::sqrt(var + eps_);
      invstd_[c] = inv;
      const T g = gamma_[c], b = beta_[c];
      for (std::size_t i = 0; i < n; ++i) {
        const T* xc = x.data() + (i * c_ + c) * h * w;
        T* xh = xhat_.data() + (i * c_ + c) * h * w;
        T* yc = y.data() + (i * c_ + c) * h * w;
        for (std::size_t j = 0; j < h * w; ++j) {
          xh[j] = (xc[j] - mean) * inv;
          yc[j] = g * xh[j] + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const std::size_t n = g.dim(0), h = g.dim(2), w = g.dim(3);
    const std::size_t m = n * h * w;
    Tensor<T> dx(g.shape());
    for (std::size_t c = 0; c < c_; ++c) {
      T sum_dy = T(0), sum_dy_xhat = T(0);
      for (std::size_t i = 0; i < n; ++i) {
        const T* gc = g.data() + (i * c_ + c) * h * w;
        const T* xh = xhat_.data() + (i * c_ + c) * h * w;
        for (std::size_t j = 0; j < h * w; ++j) {
          sum_dy += gc[j];
          sum_dy_xhat += gc[j] * xh[j];
        }
      }
      dgamma_[c] += sum_dy_xhat;
      dbeta_[c] += sum_dy;
      const T gamma_inv = gamma_[c] * invstd_[c];
      for (std::size_t i = 0; i < n; ++i) {
        const T* gc = g.data() + (i * c_ + c) * h * w;
        const T* xh = xhat_.data() + (i * c_ + c) * h * w;
        T* dxc = dx.data() + (i * c_ + c) * h * w;
        for (std::size_t j = 0; j < h * w; ++j) {
          if (training_) {
            // batch statistics participate in the gradient
            dxc[j] = gamma_inv / static_cast<T>(m) *
                     (static_cast<T>(m) * gc[j] - sum_dy - xh[j] * sum_dy_xhat);
          } else {
            dxc[j] = gamma_inv * gc[j];
          }
        }
      }
    }
    return dx;
  }

  void collect_params(const std::string& p, std::vector<ParamRef<T>>& out) override {
    out.push_back({p + ".gamma", &gamma_, &dgamma_});
    out.push_back({p + ".beta", &beta_, &dbeta_});
  }

  void collect_buffers(const std::string& p, std::vector<BufferRef<T>>& out) override {
    out.push_back({p + ".running_mean", &running_mean_});
    out.push_back({p + ".running_var", &running_var_});
  }

  const char* kind() const override { return "batchnorm"; }

private:
  template <typename Fn>
  void for_each_c(const Tensor<T>& x, std::size_t c, Fn&& fn) const {
    const std::size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    for (std::size_t i = 0; i < n; ++i) {
      const T* xc = x.data() + (i * c_ + c) * h * w;
      for (std::size_t j = 0; j < h * w; ++j) fn(xc[j]);
    }
  }

  std::size_t c_;
  T momentum_, eps_;
  Tensor<T> gamma_, beta_, dgamma_, dbeta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_, invstd_;
  bool training_ = true;
};

template <typename T>
class ReLU final : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    x_ = x;
    Tensor<T> y = x;
    for (auto& v : y.vec()) v = v > T(0) ? v : T(0);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.numel(); ++i)
      if (x_[i] <= T(0)) dx[i] = T(0);
    return dx;
  }
  const char* kind() const override { return "relu"; }

private:
  Tensor<T> x_;
};

template <typename T>
class LeakyReLU final : public Layer<T> {
public:
  explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    x_ = x;
    Tensor<T> y = x;
    for (auto& v : y.vec())
      if (v < T(0)) v *= slope_;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.numel(); ++i)
      if (x_[i] < T(0)) dx[i] *= slope_;
    return dx;
  }
  const char* kind() const override { return "leaky_relu"; }

private:
  T slope_;
  Tensor<T> x_;
};

template <typename T>
class Sigmoid final : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    y_ = x;
    for (auto& v : y_.vec()) v = T(1) / (T(1) + std::exp(-v));
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] *= y_[i] * (T(1) - y_[i]);
    return dx;
  }
  const char* kind() const override { return "sigmoid"; }

private:
  Tensor<T> y_;
};

template <typename T>
class Tanh final : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    y_ = x;
    for (auto& v : y_.vec()) v = std::tanh(v);
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx = g;
    for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] *= T(1) - y_[i] * y_[i];
    return dx;
  }
  const char* kind() const override { return "tanh"; }

private:
  Tensor<T> y_;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
public:
  explicit MaxPool2d(std::size_t k, std::size_t stride = 0) : k_(k), stride_(stride ? stride : k) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_shape_ = x.shape();
    oh_ = (h - k_) / stride_ + 1;
    ow_ = (w - k_) / stride_ + 1;
    Tensor<T> y({n, c, oh_, ow_});
    argmax_.assign(y.numel(), 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t cc = 0; cc < c; ++cc) {
        const T* xc = x.data() + (i * c + cc) * h * w;
        const std::size_t base = (i * c + cc) * oh_ * ow_;
        for (std::size_t oy = 0; oy < oh_; ++oy)
          for (std::size_t ox = 0; ox < ow_; ++ox) {
            T best = xc[(oy * stride_) * w + ox * stride_];
            std::size_t best_idx = (oy * stride_) * w + ox * stride_;
            for (std::size_t ki = 0; ki < k_; ++ki)
              for (std::size_t kj = 0; kj < k_; ++kj) {
                const std::size_t idx = (oy * stride_ + ki) * w + ox * stride_ + kj;
                if (xc[idx] > best) {  // ties keep the first (row-major) index
                  best = xc[idx];
                  best_idx = idx;
                }
              }
            y[base + oy * ow_ + ox] = best;
            argmax_[base + oy * ow_ + ox] = best_idx;
          }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> dx(in_shape_);
    const std::size_t n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t cc = 0; cc < c; ++cc) {
        T* dxc = dx.data() + (i * c + cc) * h * w;
        const std::size_t base = (i * c + cc) * oh_ * ow_;
        for (std::size_t j = 0; j < oh_ * ow_; ++j) dxc[argmax_[base + j]] += g[base + j];
      }
    return dx;
  }

  const char* kind() const override { return "maxpool"; }

private:
  std::size_t k_, stride_;
  std::size_t oh_ = 0, ow_ = 0;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

template <typename T>
class Flatten final : public Layer<T> {
public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.numel() / x.dim(0)});
  }
  Tensor<T> backward(const Tensor<T>& g) override { return g.reshaped(in_shape_); }
  const char* kind() const override { return "flatten"; }

private:
  std::vector<std::size_t> in_shape_;
};

/// (N, C*H*W) -> (N, C, H, W); the generator's projection head uses it.
template <typename T>
class ToImage final : public Layer<T> {
public:
  ToImage(std::size_t c, std::size_t h, std::size_t w) : c_(c), h_(h), w_(w) {}
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    return x.reshaped({x.dim(0), c_, h_, w_});
  }
  Tensor<T> backward(const Tensor<T>& g) override {
    return g.reshaped({g.dim(0), c_ * h_ * w_});
  }
  const char* kind() const override { return "to_image"; }

private:
  std::size_t c_, h_, w_;
};

template <typename T>
class Sequential {
public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    Tensor<T> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, training);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& grad_out) {
    Tensor<T> cur = grad_out;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
  }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_params("l" + std::to_string(i) + "." + layers_[i]->kind(), out);
    return out;
  }

  std::vector<BufferRef<T>> buffers() {
    std::vector<BufferRef<T>> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->collect_buffers("l" + std::to_string(i) + "." + layers_[i]->kind(), out);
    return out;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grad->set_zero();
  }

  std::size_t size() const { return layers_.size(); }

private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace tnt::nn
