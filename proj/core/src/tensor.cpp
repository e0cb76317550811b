#include "bridges/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace bridges {

namespace {

thread_local int g_no_grad_depth = 0;

template <class S>
using Node = typename TensorT<S>::Node;
template <class S>
using NodePtr = typename TensorT<S>::NodePtr;

template <class S>
std::vector<S>& grad_buf(Node<S>& n) {
  if (n.grad.size() != n.data.size()) n.grad.assign(n.data.size(), S(0));
  return n.grad;
}

/// Builds an op-output node; drops tape links under NoGradGuard or when no
/// parent requires grad.
template <class S>
TensorT<S> make_op(Shape shape, std::vector<S> data, std::vector<TensorT<S>> parents,
                   std::function<void(Node<S>&)> bw) {
  auto out = TensorT<S>::from_data(std::move(shape), std::move(data));
  bool req = false;
  if (!NoGradGuard::active())
    for (const auto& p : parents) req = req || p.requires_grad();
  if (req) {
    auto& n = *out.node();
    n.requires_grad = true;
    n.leaf = false;
    n.parents.reserve(parents.size());
    for (auto& p : parents) n.parents.push_back(p.node());
    n.backward_fn = std::move(bw);
  }
  return out;
}

template <class S>
void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeMismatch(std::string(op) + " operands differ");
}

// --- matmul kernels (single-threaded, fixed accumulation order) ---

// c = a · b, a [m×k], b [k×n]
template <class S>
void mm_nn(const S* a, const S* b, S* c, long m, long k, long n) {
  std::fill(c, c + m * n, S(0));
  for (long i = 0; i < m; ++i) {
    const S* arow = a + i * k;
    S* crow = c + i * n;
    for (long l = 0; l < k; ++l) {
      const S av = arow[l];
      const S* brow = b + l * n;
      for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c = a · bᵀ, a [m×p], b [q×p] -> c [m×q]
template <class S>
void mm_nt(const S* a, const S* b, S* c, long m, long p, long q) {
  for (long i = 0; i < m; ++i) {
    const S* arow = a + i * p;
    S* crow = c + i * q;
    for (long j = 0; j < q; ++j) {
      const S* brow = b + j * p;
      S acc = S(0);
      for (long l = 0; l < p; ++l) acc += arow[l] * brow[l];
      crow[j] = acc;
    }
  }
}

// c += aᵀ · b, a [r×m], b [r×n] -> c [m×n]
template <class S>
void mm_tn_accum(const S* a, const S* b, S* c, long r, long m, long n) {
  for (long l = 0; l < r; ++l) {
    const S* arow = a + l * m;
    const S* brow = b + l * n;
    for (long i = 0; i < m; ++i) {
      const S av = arow[i];
      S* crow = c + i * n;
      for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
void add_into(std::vector<S>& dst, const std::vector<S>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool NoGradGuard::active() { return g_no_grad_depth > 0; }

// ---------------------------------------------------------------------------
// elementwise & linear algebra
// ---------------------------------------------------------------------------

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  check_same_shape(a, b, "add");
  std::vector<S> out(a.data());
  add_into(out, b.data());
  return make_op<S>(a.shape(), std::move(out), {a, b},
                    [pa = a.node(), pb = b.node()](Node<S>& n) {
                      if (pa->requires_grad) add_into(grad_buf(*pa), n.grad);
                      if (pb->requires_grad) add_into(grad_buf(*pb), n.grad);
                    });
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  check_same_shape(a, b, "sub");
  std::vector<S> out(a.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
  return make_op<S>(a.shape(), std::move(out), {a, b},
                    [pa = a.node(), pb = b.node()](Node<S>& n) {
                      if (pa->requires_grad) add_into(grad_buf(*pa), n.grad);
                      if (pb->requires_grad) {
                        auto& g = grad_buf(*pb);
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
                      }
                    });
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  check_same_shape(a, b, "mul");
  std::vector<S> out(a.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
  return make_op<S>(a.shape(), std::move(out), {a, b},
                    [pa = a.node(), pb = b.node()](Node<S>& n) {
                      if (pa->requires_grad) {
                        auto& g = grad_buf(*pa);
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pb->data[i];
                      }
                      if (pb->requires_grad) {
                        auto& g = grad_buf(*pb);
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pa->data[i];
                      }
                    });
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, double c) {
  std::vector<S> out(a.data());
  const S sc = static_cast<S>(c);
  for (auto& v : out) v *= sc;
  return make_op<S>(a.shape(), std::move(out), {a}, [pa = a.node(), sc](Node<S>& n) {
    if (!pa->requires_grad) return;
    auto& g = grad_buf(*pa);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += sc * n.grad[i];
  });
}

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeMismatch("matmul inner dimensions");
  const long m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<S> out(m * n);
  mm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_op<S>({m, n}, std::move(out), {a, b},
                    [pa = a.node(), pb = b.node(), m, k, n](Node<S>& nd) {
                      if (pa->requires_grad) {  // da = g · bᵀ
                        std::vector<S> tmp(m * k);
                        mm_nt(nd.grad.data(), pb->data.data(), tmp.data(), m, n, k);
                        add_into(grad_buf(*pa), tmp);
                      }
                      if (pb->requires_grad) {  // db = aᵀ · g
                        mm_tn_accum(pa->data.data(), nd.grad.data(), grad_buf(*pb).data(), m, k, n);
                      }
                    });
}

template <class S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& bias) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || x.shape()[1] != w.shape()[1])
    throw ShapeMismatch("linear: x [r,in] and w [out,in]");
  const long r = x.shape()[0], in = x.shape()[1], out_dim = w.shape()[0];
  if (bias.defined() && bias.numel() != out_dim) throw ShapeMismatch("linear bias");
  std::vector<S> out(r * out_dim);
  mm_nt(x.data().data(), w.data().data(), out.data(), r, in, out_dim);
  if (bias.defined())
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < out_dim; ++j) out[i * out_dim + j] += bias.data()[j];

  std::vector<TensorT<S>> parents = {x, w};
  if (bias.defined()) parents.push_back(bias);
  auto pbias = bias.defined() ? bias.node() : nullptr;
  return make_op<S>({r, out_dim}, std::move(out), std::move(parents),
                    [px = x.node(), pw = w.node(), pbias, r, in, out_dim](Node<S>& nd) {
                      if (px->requires_grad) {  // dx = g · W
                        std::vector<S> tmp(r * in);
                        mm_nn(nd.grad.data(), pw->data.data(), tmp.data(), r, out_dim, in);
                        add_into(grad_buf(*px), tmp);
                      }
                      if (pw->requires_grad)  // dW = gᵀ · x
                        mm_tn_accum(nd.grad.data(), px->data.data(), grad_buf(*pw).data(), r,
                                    out_dim, in);
                      if (pbias && pbias->requires_grad) {
                        auto& g = grad_buf(*pbias);
                        for (long i = 0; i < r; ++i)
                          for (long j = 0; j < out_dim; ++j) g[j] += nd.grad[i * out_dim + j];
                      }
                    });
}

template <class S>
TensorT<S> transpose(const TensorT<S>& a) {
  if (a.shape().size() != 2) throw ShapeMismatch("transpose expects rank 2");
  const long r = a.shape()[0], c = a.shape()[1];
  std::vector<S> out(r * c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  return make_op<S>({c, r}, std::move(out), {a}, [pa = a.node(), r, c](Node<S>& n) {
    if (!pa->requires_grad) return;
    auto& g = grad_buf(*pa);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) g[i * c + j] += n.grad[j * r + i];
  });
}

template <class S>
TensorT<S> gelu(const TensorT<S>& x) {
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  std::vector<S> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = static_cast<double>(x.data()[i]);
    out[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  return make_op<S>(x.shape(), std::move(out), {x}, [px = x.node()](Node<S>& n) {
    if (!px->requires_grad) return;
    auto& g = grad_buf(*px);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = static_cast<double>(px->data[i]);
      const double d = 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
                       v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] += n.grad[i] * static_cast<S>(d);
    }
  });
}

template <class S>
TensorT<S> softmax_masked(const TensorT<S>& x, const AttnMaskPtr& mask) {
  const long r = x.rows(), c = x.cols();
  if (mask && (mask->rows != r || mask->cols != c)) throw ShapeMismatch("softmax mask");
  std::vector<S> out(x.data().size(), S(0));
  for (long i = 0; i < r; ++i) {
    const S* row = x.data().data() + i * c;
    double mx = 0;
    bool any = false;
    for (long j = 0; j < c; ++j) {
      if (mask && !mask->at(i, j)) continue;
      if (!any || row[j] > mx) mx = row[j];
      any = true;
    }
    if (!any) throw AllMaskedRow(static_cast<std::size_t>(i));
    double denom = 0;
    for (long j = 0; j < c; ++j) {
      if (mask && !mask->at(i, j)) continue;
      const double e = std::exp(static_cast<double>(row[j]) - mx);
      out[i * c + j] = static_cast<S>(e);
      denom += e;
    }
    for (long j = 0; j < c; ++j) {
      if (mask && !mask->at(i, j)) continue;
      out[i * c + j] = static_cast<S>(out[i * c + j] / denom);
    }
  }
  auto probs = out;  // saved for backward
  return make_op<S>(x.shape(), std::move(out), {x},
                    [px = x.node(), mask, probs = std::move(probs), r, c](Node<S>& n) {
                      if (!px->requires_grad) return;
                      auto& g = grad_buf(*px);
                      for (long i = 0; i < r; ++i) {
                        double dot = 0;
                        for (long j = 0; j < c; ++j) {
                          if (mask && !mask->at(i, j)) continue;
                          dot += static_cast<double>(n.grad[i * c + j]) * probs[i * c + j];
                        }
                        for (long j = 0; j < c; ++j) {
                          if (mask && !mask->at(i, j)) continue;
                          g[i * c + j] += static_cast<S>(
                              probs[i * c + j] * (static_cast<double>(n.grad[i * c + j]) - dot));
                        }
                      }
                    });
}

template <class S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                      double eps) {
  const long r = x.rows(), c = x.cols();
  if (gamma.numel() != c || beta.numel() != c) throw ShapeMismatch("layer_norm affine");
  std::vector<S> out(x.data().size());
  std::vector<S> xhat(x.data().size());
  std::vector<S> inv_std(r);
  for (long i = 0; i < r; ++i) {
    const S* row = x.data().data() + i * c;
    double mu = 0;
    for (long j = 0; j < c; ++j) mu += row[j];
    mu /= c;
    double var = 0;
    for (long j = 0; j < c; ++j) {
      const double d = row[j] - mu;
      var += d * d;
    }
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = static_cast<S>(is);
    for (long j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[i * c + j] = static_cast<S>(h);
      out[i * c + j] = static_cast<S>(h) * gamma.data()[j] + beta.data()[j];
    }
  }
  return make_op<S>(
      x.shape(), std::move(out), {x, gamma, beta},
      [px = x.node(), pg = gamma.node(), pb = beta.node(), xhat = std::move(xhat),
       inv_std = std::move(inv_std), r, c](Node<S>& n) {
        if (pg->requires_grad) {
          auto& g = grad_buf(*pg);
          for (long i = 0; i < r; ++i)
            for (long j = 0; j < c; ++j) g[j] += n.grad[i * c + j] * xhat[i * c + j];
        }
        if (pb->requires_grad) {
          auto& g = grad_buf(*pb);
          for (long i = 0; i < r; ++i)
            for (long j = 0; j < c; ++j) g[j] += n.grad[i * c + j];
        }
        if (px->requires_grad) {
          auto& g = grad_buf(*px);
          for (long i = 0; i < r; ++i) {
            double sum_dh = 0, sum_dh_h = 0;
            for (long j = 0; j < c; ++j) {
              const double dh = static_cast<double>(n.grad[i * c + j]) * pg->data[j];
              sum_dh += dh;
              sum_dh_h += dh * xhat[i * c + j];
            }
            for (long j = 0; j < c; ++j) {
              const double dh = static_cast<double>(n.grad[i * c + j]) * pg->data[j];
              const double dx =
                  (dh - sum_dh / c - xhat[i * c + j] * sum_dh_h / c) * inv_std[i];
              g[i * c + j] += static_cast<S>(dx);
            }
          }
        }
      });
}

template <class S>
TensorT<S> cross_entropy(const TensorT<S>& logits, const std::vector<int>& targets) {
  const long b = logits.rows(), c = logits.cols();
  if (static_cast<long>(targets.size()) != b) throw ShapeMismatch("cross_entropy targets");
  for (long i = 0; i < b; ++i)
    if (targets[i] < 0 || targets[i] >= c) throw TargetOutOfRange(i, targets[i]);
  std::vector<S> probs(logits.data().size());
  double loss = 0;
  for (long i = 0; i < b; ++i) {
    const S* row = logits.data().data() + i * c;
    double mx = row[0];
    for (long j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double denom = 0;
    for (long j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
    const double log_denom = std::log(denom);
    for (long j = 0; j < c; ++j)
      probs[i * c + j] = static_cast<S>(std::exp(static_cast<double>(row[j]) - mx) / denom);
    loss -= (static_cast<double>(row[targets[i]]) - mx - log_denom);
  }
  loss /= b;
  return make_op<S>({1}, {static_cast<S>(loss)}, {logits},
                    [pl = logits.node(), probs = std::move(probs), targets, b, c](Node<S>& n) {
                      if (!pl->requires_grad) return;
                      auto& g = grad_buf(*pl);
                      const S gs = n.grad[0];
                      for (long i = 0; i < b; ++i)
                        for (long j = 0; j < c; ++j) {
                          S d = probs[i * c + j];
                          if (j == targets[i]) d -= S(1);
                          g[i * c + j] += gs * d / static_cast<S>(b);
                        }
                    });
}

template <class S>
TensorT<S> sum_all(const TensorT<S>& x) {
  double s = 0;
  for (const auto v : x.data()) s += v;
  return make_op<S>({1}, {static_cast<S>(s)}, {x}, [px = x.node()](Node<S>& n) {
    if (!px->requires_grad) return;
    auto& g = grad_buf(*px);
    for (auto& v : g) v += n.grad[0];
  });
}

template <class S>
TensorT<S> mean_rows(const TensorT<S>& x) {
  const long r = x.rows(), c = x.cols();
  std::vector<S> out(c, S(0));
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) out[j] += x.data()[i * c + j];
  for (auto& v : out) v /= static_cast<S>(r);
  return make_op<S>({1, c}, std::move(out), {x}, [px = x.node(), r, c](Node<S>& n) {
    if (!px->requires_grad) return;
    auto& g = grad_buf(*px);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) g[i * c + j] += n.grad[j] / static_cast<S>(r);
  });
}

template <class S>
TensorT<S> colmax(const TensorT<S>& x) {
  const long r = x.rows(), c = x.cols();
  std::vector<S> out(c);
  std::vector<long> arg(c, 0);
  for (long j = 0; j < c; ++j) {
    S best = x.data()[j];
    long bi = 0;
    for (long i = 1; i < r; ++i) {
      const S v = x.data()[i * c + j];
      if (v > best) {  // strict: ties keep the smallest row index
        best = v;
        bi = i;
      }
    }
    out[j] = best;
    arg[j] = bi;
  }
  return make_op<S>({1, c}, std::move(out), {x},
                    [px = x.node(), arg = std::move(arg), c](Node<S>& n) {
                      if (!px->requires_grad) return;
                      auto& g = grad_buf(*px);
                      for (long j = 0; j < c; ++j) g[arg[j] * c + j] += n.grad[j];
                    });
}

template <class S>
TensorT<S> l2_normalize_rows(const TensorT<S>& x) {
  const long r = x.rows(), c = x.cols();
  std::vector<S> out(x.data().size());
  std::vector<S> inv_norm(r);
  for (long i = 0; i < r; ++i) {
    double s = 0;
    for (long j = 0; j < c; ++j) {
      const double v = x.data()[i * c + j];
      s += v * v;
    }
    const double inv = 1.0 / std::sqrt(s + 1e-12);
    inv_norm[i] = static_cast<S>(inv);
    for (long j = 0; j < c; ++j) out[i * c + j] = static_cast<S>(x.data()[i * c + j] * inv);
  }
  auto saved = out;
  return make_op<S>(x.shape(), std::move(out), {x},
                    [px = x.node(), saved = std::move(saved), inv_norm = std::move(inv_norm), r,
                     c](Node<S>& n) {
                      if (!px->requires_grad) return;
                      auto& g = grad_buf(*px);
                      for (long i = 0; i < r; ++i) {
                        double dot = 0;
                        for (long j = 0; j < c; ++j)
                          dot += static_cast<double>(n.grad[i * c + j]) * saved[i * c + j];
                        for (long j = 0; j < c; ++j)
                          g[i * c + j] += static_cast<S>(
                              (static_cast<double>(n.grad[i * c + j]) - dot * saved[i * c + j]) *
                              inv_norm[i]);
                      }
                    });
}

template <class S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows of nothing");
  const long c = parts[0].cols();
  long r = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw ShapeMismatch("concat_rows column mismatch");
    r += p.rows();
  }
  std::vector<S> out;
  out.reserve(r * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<NodePtr<S>> pn;
  for (const auto& p : parts) pn.push_back(p.node());
  return make_op<S>({r, c}, std::move(out), parts, [pn = std::move(pn), c](Node<S>& n) {
    long at = 0;
    for (const auto& p : pn) {
      const long sz = static_cast<long>(p->data.size());
      if (p->requires_grad) {
        auto& g = grad_buf(*p);
        for (long i = 0; i < sz; ++i) g[i] += n.grad[at + i];
      }
      at += sz;
    }
  });
}

template <class S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols of nothing");
  const long r = parts[0].rows();
  long c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw ShapeMismatch("concat_cols row mismatch");
    c += p.cols();
  }
  std::vector<S> out(r * c);
  long at = 0;
  for (const auto& p : parts) {
    const long pc = p.cols();
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < pc; ++j) out[i * c + at + j] = p.data()[i * pc + j];
    at += pc;
  }
  std::vector<NodePtr<S>> pn;
  for (const auto& p : parts) pn.push_back(p.node());
  return make_op<S>({r, c}, std::move(out), parts, [pn = std::move(pn), r, c](Node<S>& n) {
    long at = 0;
    for (const auto& p : pn) {
      const long pc = static_cast<long>(p->shape.back());
      if (p->requires_grad) {
        auto& g = grad_buf(*p);
        for (long i = 0; i < r; ++i)
          for (long j = 0; j < pc; ++j) g[i * pc + j] += n.grad[i * c + at + j];
      }
      at += pc;
    }
  });
}

template <class S>
TensorT<S> slice_rows(const TensorT<S>& x, long r0, long r1) {
  const long r = x.rows(), c = x.cols();
  if (r0 < 0 || r1 > r || r0 >= r1) throw ShapeMismatch("slice_rows range");
  std::vector<S> out(x.data().begin() + r0 * c, x.data().begin() + r1 * c);
  return make_op<S>({r1 - r0, c}, std::move(out), {x}, [px = x.node(), r0, c](Node<S>& n) {
    if (!px->requires_grad) return;
    auto& g = grad_buf(*px);
    for (std::size_t i = 0; i < n.grad.size(); ++i) g[r0 * c + i] += n.grad[i];
  });
}

template <class S>
TensorT<S> embedding_rows(const TensorT<S>& table, const std::vector<int>& ids) {
  const long v = table.rows(), d = table.cols();
  for (const auto id : ids)
    if (id < 0 || id >= v) throw VocabOverflow(id);
  const long t = static_cast<long>(ids.size());
  std::vector<S> out(t * d);
  for (long i = 0; i < t; ++i)
    std::copy_n(table.data().begin() + ids[i] * d, d, out.begin() + i * d);
  return make_op<S>({t, d}, std::move(out), {table}, [pt = table.node(), ids, d](Node<S>& n) {
    if (!pt->requires_grad) return;
    auto& g = grad_buf(*pt);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (long j = 0; j < d; ++j) g[ids[i] * d + j] += n.grad[i * d + j];
  });
}

template <class S>
TensorT<S> spmm_mean(const AdjacencyPtr& adj, const TensorT<S>& x) {
  const long r = adj->rows, c = x.cols();
  std::vector<S> out(r * c, S(0));
  for (long i = 0; i < r; ++i) {
    const auto& nb = adj->nbrs[i];
    if (nb.empty()) continue;
    S* row = out.data() + i * c;
    for (const auto u : nb) {
      const S* src = x.data().data() + static_cast<long>(u) * c;
      for (long j = 0; j < c; ++j) row[j] += src[j];
    }
    const S inv = S(1) / static_cast<S>(nb.size());
    for (long j = 0; j < c; ++j) row[j] *= inv;
  }
  return make_op<S>({r, c}, std::move(out), {x}, [px = x.node(), adj, c](Node<S>& n) {
    if (!px->requires_grad) return;
    auto& g = grad_buf(*px);
    for (long i = 0; i < adj->rows; ++i) {
      const auto& nb = adj->nbrs[i];
      if (nb.empty()) continue;
      const S inv = S(1) / static_cast<S>(nb.size());
      const S* grow = n.grad.data() + i * c;
      for (const auto u : nb) {
        S* dst = g.data() + static_cast<long>(u) * c;
        for (long j = 0; j < c; ++j) dst[j] += inv * grow[j];
      }
    }
  });
}

template <class S>
TensorT<S> pool4(const TensorT<S>& x) {
  const long r = x.rows(), c = x.cols();
  if (r < 1) throw EmptyGraph();
  std::vector<S> out(4 * c);
  std::vector<long> amax(c, 0), amin(c, 0);
  for (long j = 0; j < c; ++j) {
    double sum = 0;
    S mx = x.data()[j], mn = x.data()[j];
    long ax = 0, an = 0;
    for (long i = 0; i < r; ++i) {
      const S v = x.data()[i * c + j];
      sum += v;
      if (v > mx) { mx = v; ax = i; }
      if (v < mn) { mn = v; an = i; }
    }
    out[0 * c + j] = static_cast<S>(sum / r);
    out[1 * c + j] = mx;
    out[2 * c + j] = static_cast<S>(sum);
    out[3 * c + j] = mn;
    amax[j] = ax;
    amin[j] = an;
  }
  return make_op<S>({4, c}, std::move(out), {x},
                    [px = x.node(), amax = std::move(amax), amin = std::move(amin), r,
                     c](Node<S>& n) {
                      if (!px->requires_grad) return;
                      auto& g = grad_buf(*px);
                      for (long j = 0; j < c; ++j) {
                        const S gmean = n.grad[0 * c + j] / static_cast<S>(r);
                        const S gsum = n.grad[2 * c + j];
                        for (long i = 0; i < r; ++i) g[i * c + j] += gmean + gsum;
                        g[amax[j] * c + j] += n.grad[1 * c + j];
                        g[amin[j] * c + j] += n.grad[3 * c + j];
                      }
                    });
}

template <class S>
TensorT<S> reciprocal(const TensorT<S>& s) {
  if (s.numel() != 1) throw ShapeMismatch("reciprocal expects a scalar");
  const S y = S(1) / s.data()[0];
  return make_op<S>({1}, {y}, {s}, [ps = s.node(), y](Node<S>& n) {
    if (!ps->requires_grad) return;
    grad_buf(*ps)[0] += -n.grad[0] * y * y;
  });
}

template <class S>
TensorT<S> mul_scalar_param(const TensorT<S>& x, const TensorT<S>& s) {
  if (s.numel() != 1) throw ShapeMismatch("mul_scalar_param scalar");
  const S sv = s.data()[0];
  std::vector<S> out(x.data());
  for (auto& v : out) v *= sv;
  return make_op<S>(x.shape(), std::move(out), {x, s},
                    [px = x.node(), ps = s.node(), sv](Node<S>& n) {
                      if (px->requires_grad) {
                        auto& g = grad_buf(*px);
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * sv;
                      }
                      if (ps->requires_grad) {
                        double acc = 0;
                        for (std::size_t i = 0; i < n.grad.size(); ++i)
                          acc += static_cast<double>(n.grad[i]) * px->data[i];
                        grad_buf(*ps)[0] += static_cast<S>(acc);
                      }
                    });
}

// ---------------------------------------------------------------------------
// fused masked multi-head attention
// ---------------------------------------------------------------------------

template <class S>
TensorT<S> multihead_attention(const TensorT<S>& q, const TensorT<S>& k, const TensorT<S>& v,
                               const AttnMaskPtr& mask, int n_heads) {
  const long sq = q.rows(), sk = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d || v.rows() != sk)
    throw ShapeMismatch("attention q/k/v widths");
  if (d % n_heads != 0) throw ShapeMismatch("attention heads must divide width");
  if (mask && (mask->rows != sq || mask->cols != sk)) throw ShapeMismatch("attention mask");
  const long dh = d / n_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  // probs[h][i*sk + j]; masked entries stay 0 and are skipped in every loop.
  std::vector<std::vector<S>> probs(n_heads, std::vector<S>(sq * sk, S(0)));
  std::vector<S> out(sq * d, S(0));
  std::vector<double> srow(sk, 0.0);
  for (int h = 0; h < n_heads; ++h) {
    const long off = h * dh;
    auto& p = probs[h];
    for (long i = 0; i < sq; ++i) {
      const S* qi = q.data().data() + i * d + off;
      double mx = 0;
      bool any = false;
      for (long j = 0; j < sk; ++j) {
        if (mask && !mask->at(i, j)) continue;
        const S* kj = k.data().data() + j * d + off;
        double acc = 0;
        for (long l = 0; l < dh; ++l) acc += static_cast<double>(qi[l]) * kj[l];
        acc *= sc;
        srow[j] = acc;
        if (!any || acc > mx) mx = acc;
        any = true;
      }
      if (!any) throw AllMaskedRow(static_cast<std::size_t>(i));
      double denom = 0;
      for (long j = 0; j < sk; ++j) {
        if (mask && !mask->at(i, j)) continue;
        const double e = std::exp(srow[j] - mx);
        p[i * sk + j] = static_cast<S>(e);
        denom += e;
      }
      S* orow = out.data() + i * d + off;
      for (long j = 0; j < sk; ++j) {
        if (mask && !mask->at(i, j)) continue;
        const S pij = static_cast<S>(p[i * sk + j] / denom);
        p[i * sk + j] = pij;
        const S* vj = v.data().data() + j * d + off;
        for (long l = 0; l < dh; ++l) orow[l] += pij * vj[l];
      }
    }
  }

  return make_op<S>(
      {sq, d}, std::move(out), {q, k, v},
      [pq = q.node(), pk = k.node(), pv = v.node(), mask, probs = std::move(probs), sq, sk, d,
       dh, n_heads, sc](Node<S>& n) {
        const bool wq = pq->requires_grad, wk = pk->requires_grad, wv = pv->requires_grad;
        if (!wq && !wk && !wv) return;
        auto& gq = grad_buf(*pq);
        auto& gk = grad_buf(*pk);
        auto& gv = grad_buf(*pv);
        std::vector<double> dp(sk);
        for (int h = 0; h < n_heads; ++h) {
          const long off = h * dh;
          const auto& p = probs[h];
          for (long i = 0; i < sq; ++i) {
            const S* go = n.grad.data() + i * d + off;
            double dot = 0;
            for (long j = 0; j < sk; ++j) {
              if (mask && !mask->at(i, j)) continue;
              const S* vj = pv->data.data() + j * d + off;
              double acc = 0;
              for (long l = 0; l < dh; ++l) acc += static_cast<double>(go[l]) * vj[l];
              dp[j] = acc;
              dot += acc * p[i * sk + j];
              if (wv) {
                S* gvj = gv.data() + j * d + off;
                const S pij = p[i * sk + j];
                for (long l = 0; l < dh; ++l) gvj[l] += pij * go[l];
              }
            }
            if (!wq && !wk) continue;
            const S* qi = pq->data.data() + i * d + off;
            S* gqi = gq.data() + i * d + off;
            for (long j = 0; j < sk; ++j) {
              if (mask && !mask->at(i, j)) continue;
              const double ds = p[i * sk + j] * (dp[j] - dot) * sc;
              const S* kj = pk->data.data() + j * d + off;
              if (wq)
                for (long l = 0; l < dh; ++l) gqi[l] += static_cast<S>(ds * kj[l]);
              if (wk) {
                S* gkj = gk.data() + j * d + off;
                for (long l = 0; l < dh; ++l) gkj[l] += static_cast<S>(ds * qi[l]);
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

template <class S>
void backward(const TensorT<S>& root) {
  if (root.numel() != 1) throw NonScalarRoot();
  auto* rn = root.node().get();
  if (!rn->requires_grad) return;

  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen{rn};
  struct Frame {
    Node<S>* n;
    std::size_t i;
  };
  std::vector<Frame> stack{{rn, 0}};
  while (!stack.empty()) {
    auto& f = stack.back();
    if (f.i < f.n->parents.size()) {
      auto* p = f.n->parents[f.i++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->leaf) {
      grad_buf(*n);  // allocate, keep accumulated values
    } else {
      n->grad.assign(n->data.size(), S(0));
    }
  }
  rn->grad[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (!(*it)->leaf && (*it)->backward_fn) (*it)->backward_fn(**it);
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define BRIDGES_INSTANTIATE_OPS(S)                                                              \
  template TensorT<S> add(const TensorT<S>&, const TensorT<S>&);                                \
  template TensorT<S> sub(const TensorT<S>&, const TensorT<S>&);                                \
  template TensorT<S> mul(const TensorT<S>&, const TensorT<S>&);                                \
  template TensorT<S> scale(const TensorT<S>&, double);                                         \
  template TensorT<S> matmul(const TensorT<S>&, const TensorT<S>&);                             \
  template TensorT<S> linear(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&);          \
  template TensorT<S> transpose(const TensorT<S>&);                                             \
  template TensorT<S> gelu(const TensorT<S>&);                                                  \
  template TensorT<S> softmax_masked(const TensorT<S>&, const AttnMaskPtr&);                    \
  template TensorT<S> layer_norm(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,       \
                                 double);                                                       \
  template TensorT<S> cross_entropy(const TensorT<S>&, const std::vector<int>&);                \
  template TensorT<S> sum_all(const TensorT<S>&);                                               \
  template TensorT<S> mean_rows(const TensorT<S>&);                                             \
  template TensorT<S> colmax(const TensorT<S>&);                                                \
  template TensorT<S> l2_normalize_rows(const TensorT<S>&);                                     \
  template TensorT<S> concat_rows(const std::vector<TensorT<S>>&);                              \
  template TensorT<S> concat_cols(const std::vector<TensorT<S>>&);                              \
  template TensorT<S> slice_rows(const TensorT<S>&, long, long);                                \
  template TensorT<S> embedding_rows(const TensorT<S>&, const std::vector<int>&);               \
  template TensorT<S> spmm_mean(const AdjacencyPtr&, const TensorT<S>&);                        \
  template TensorT<S> pool4(const TensorT<S>&);                                                 \
  template TensorT<S> reciprocal(const TensorT<S>&);                                            \
  template TensorT<S> mul_scalar_param(const TensorT<S>&, const TensorT<S>&);                   \
  template TensorT<S> multihead_attention(const TensorT<S>&, const TensorT<S>&,                 \
                                          const TensorT<S>&, const AttnMaskPtr&, int);          \
  template void backward(const TensorT<S>&);

BRIDGES_INSTANTIATE_OPS(float)
BRIDGES_INSTANTIATE_OPS(double)

#undef BRIDGES_INSTANTIATE_OPS

}  // namespace bridges
