#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cadm {

// Dense 4-D tensor in NCHW layout. Vectors and per-channel quantities use
// singleton trailing dimensions, e.g. a channel vector is (N, C, 1, 1).
template <typename S>
class Tensor {
 public:
  Tensor() = default;

  Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w) {
    if (n <= 0 || c <= 0 || h <= 0 || w <= 0)
      throw std::invalid_argument("Tensor: dimensions must be positive, got " +
                                  dims_str(n, c, h, w));
    v_.assign(static_cast<std::size_t>(n) * c * h * w, S(0));
  }

  static Tensor full(int n, int c, int h, int w, S value) {
    Tensor t(n, c, h, w);
    t.fill(value);
    return t;
  }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  S* data() { return v_.data(); }
  const S* data() const { return v_.data(); }

  S& operator[](std::size_t i) { return v_[i]; }
  S operator[](std::size_t i) const { return v_[i]; }

  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * c_ + c) * h_ + h) * w_ + w;
  }
  S& at(int n, int c, int h, int w) { return v_[index(n, c, h, w)]; }
  S at(int n, int c, int h, int w) const { return v_[index(n, c, h, w)]; }

  void fill(S x) { std::fill(v_.begin(), v_.end(), x); }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  std::string shape_str() const { return dims_str(n_, c_, h_, w_); }

  template <typename S2>
  Tensor<S2> cast() const {
    Tensor<S2> out(n_, c_, h_, w_);
    for (std::size_t i = 0; i < v_.size(); ++i) out[i] = static_cast<S2>(v_[i]);
    return out;
  }

 private:
  static std::string dims_str(int n, int c, int h, int w) {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }

  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<S> v_;
};

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

}  // namespace cadm
