#include "pclmatch/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pclmatch/losses.hpp"

namespace pclmatch {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// y = g .* (x - mean) / sqrt(var + eps) + b over one row of width n.
void layer_norm_row(const double* x, const double* g, const double* b, int n, double* xhat,
                    double* rstd_out, double* y) {
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += x[i];
  mean /= n;
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    var += d * d;
  }
  var /= n;
  const double rstd = 1.0 / std::sqrt(var + kLnEps);
  for (int i = 0; i < n; ++i) {
    xhat[i] = (x[i] - mean) * rstd;
    y[i] = g[i] * xhat[i] + b[i];
  }
  *rstd_out = rstd;
}

// Given dL/dy, accumulates dL/dg and dL/db and returns dL/dx for one row.
void layer_norm_row_backward(const double* dy, const double* xhat, double rstd, const double* g,
                             int n, double* dg, double* db, double* dx) {
  double sum_t = 0.0;
  double sum_tx = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = dy[i] * g[i];
    sum_t += t;
    sum_tx += t * xhat[i];
    dg[i] += dy[i] * xhat[i];
    db[i] += dy[i];
  }
  const double mean_t = sum_t / n;
  const double mean_tx = sum_tx / n;
  for (int i = 0; i < n; ++i) {
    const double t = dy[i] * g[i];
    dx[i] = rstd * (t - mean_t - xhat[i] * mean_tx);
  }
}

void add_bias_rows(Tensor& m, const Tensor& bias) {
  for (int r = 0; r < m.rows; ++r) {
    double* row = m.row(r);
    const double* b = bias.row(0);
    for (int c = 0; c < m.cols; ++c) row[c] += b[c];
  }
}

void accum_col_sums(const Tensor& m, Tensor& bias_grad) {
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    double* b = bias_grad.row(0);
    for (int c = 0; c < m.cols; ++c) b[c] += row[c];
  }
}

void fill_normal(Tensor& t, Rng& rng, double stddev) {
  for (double& x : t.v) x = rng.normal(0.0, stddev);
}

Tensor sample_dropout_mask(int rows, int cols, double rate, Rng& rng) {
  Tensor mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& x : mask.v) x = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

void apply_mask(Tensor& m, const Tensor& mask) {
  for (std::size_t i = 0; i < m.v.size(); ++i) m.v[i] *= mask.v[i];
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size < Vocab::kNumSpecials) {
    throw std::invalid_argument("encoder.vocab_size must be >= 5");
  }
  if (dim <= 0 || heads <= 0 || ffn_dim <= 0 || layers < 0) {
    throw std::invalid_argument("encoder dimensions must be positive (layers may be 0)");
  }
  if (dim % heads != 0) throw std::invalid_argument("encoder.dim must be divisible by encoder.heads");
  if (max_len < 5) throw std::invalid_argument("encoder.max_len must be >= 5");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw std::invalid_argument("encoder.dropout must lie in [0, 1)");
  }
}

std::vector<std::pair<std::string, Tensor*>> tensor_entries(EncoderParams& p) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("tok_emb", &p.tok_emb);
  out.emplace_back("pos_emb", &p.pos_emb);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    const std::string prefix = "layers." + std::to_string(l) + ".";
    out.emplace_back(prefix + "ln1_g", &layer.ln1_g);
    out.emplace_back(prefix + "ln1_b", &layer.ln1_b);
    out.emplace_back(prefix + "wq", &layer.wq);
    out.emplace_back(prefix + "bq", &layer.bq);
    out.emplace_back(prefix + "wk", &layer.wk);
    out.emplace_back(prefix + "bk", &layer.bk);
    out.emplace_back(prefix + "wv", &layer.wv);
    out.emplace_back(prefix + "bv", &layer.bv);
    out.emplace_back(prefix + "wo", &layer.wo);
    out.emplace_back(prefix + "bo", &layer.bo);
    out.emplace_back(prefix + "ln2_g", &layer.ln2_g);
    out.emplace_back(prefix + "ln2_b", &layer.ln2_b);
    out.emplace_back(prefix + "w1", &layer.w1);
    out.emplace_back(prefix + "b1", &layer.b1);
    out.emplace_back(prefix + "w2", &layer.w2);
    out.emplace_back(prefix + "b2", &layer.b2);
  }
  out.emplace_back("lnf_g", &p.lnf_g);
  out.emplace_back("lnf_b", &p.lnf_b);
  out.emplace_back("head_w", &p.head_w);
  out.emplace_back("head_b", &p.head_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> tensor_entries(const EncoderParams& p) {
  auto mut = tensor_entries(const_cast<EncoderParams&>(p));
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(std::move(name), t);
  return out;
}

namespace {

EncoderParams allocate_params(const EncoderConfig& cfg) {
  EncoderParams p;
  p.cfg = cfg;
  p.tok_emb = Tensor(cfg.vocab_size, cfg.dim);
  p.pos_emb = Tensor(cfg.max_len, cfg.dim);
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& layer : p.layers) {
    layer.ln1_g = Tensor(1, cfg.dim);
    layer.ln1_b = Tensor(1, cfg.dim);
    layer.wq = Tensor(cfg.dim, cfg.dim);
    layer.bq = Tensor(1, cfg.dim);
    layer.wk = Tensor(cfg.dim, cfg.dim);
    layer.bk = Tensor(1, cfg.dim);
    layer.wv = Tensor(cfg.dim, cfg.dim);
    layer.bv = Tensor(1, cfg.dim);
    layer.wo = Tensor(cfg.dim, cfg.dim);
    layer.bo = Tensor(1, cfg.dim);
    layer.ln2_g = Tensor(1, cfg.dim);
    layer.ln2_b = Tensor(1, cfg.dim);
    layer.w1 = Tensor(cfg.dim, cfg.ffn_dim);
    layer.b1 = Tensor(1, cfg.ffn_dim);
    layer.w2 = Tensor(cfg.ffn_dim, cfg.dim);
    layer.b2 = Tensor(1, cfg.dim);
  }
  p.lnf_g = Tensor(1, cfg.dim);
  p.lnf_b = Tensor(1, cfg.dim);
  p.head_w = Tensor(cfg.dim, EncoderConfig::kNumClasses);
  p.head_b = Tensor(1, EncoderConfig::kNumClasses);
  return p;
}

}  // namespace

EncoderParams init_params(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  EncoderParams p = allocate_params(cfg);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.dim));

  fill_normal(p.tok_emb, rng, scale);
  fill_normal(p.pos_emb, rng, scale);
  for (auto& layer : p.layers) {
    layer.ln1_g.fill(1.0);
    fill_normal(layer.wq, rng, scale);
    fill_normal(layer.wk, rng, scale);
    fill_normal(layer.wv, rng, scale);
    fill_normal(layer.wo, rng, scale);
    layer.ln2_g.fill(1.0);
    fill_normal(layer.w1, rng, scale);
    fill_normal(layer.w2, rng, scale);
  }
  p.lnf_g.fill(1.0);
  fill_normal(p.head_w, rng, scale);
  return p;
}

EncoderParams zeros_like(const EncoderParams& p) { return allocate_params(p.cfg); }

namespace {

void check_batch(const EncoderConfig& cfg, const std::vector<InputSequence>& batch) {
  for (const auto& seq : batch) {
    if (seq.ids.empty()) throw std::invalid_argument("forward: empty input sequence");
    if (static_cast<int>(seq.ids.size()) > cfg.max_len) {
      throw std::invalid_argument("forward: sequence length " +
                                  std::to_string(seq.ids.size()) + " exceeds max_len " +
                                  std::to_string(cfg.max_len));
    }
    for (int id : seq.ids) {
      if (id < 0 || id >= cfg.vocab_size) {
        throw std::invalid_argument("forward: token id " + std::to_string(id) +
                                    " out of range for vocab size " +
                                    std::to_string(cfg.vocab_size));
      }
    }
  }
}

}  // namespace

ForwardResult forward(const EncoderParams& params, const std::vector<InputSequence>& batch,
                      bool train_mode, Rng* dropout_rng) {
  const EncoderConfig& cfg = params.cfg;
  check_batch(cfg, batch);
  const bool use_dropout = train_mode && cfg.dropout_rate > 0.0 && dropout_rng != nullptr;
  const int dim = cfg.dim;
  const int heads = cfg.heads;
  const int dh = cfg.head_dim();
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardResult result;
  result.cache.cfg = cfg;
  result.cache.train_mode = train_mode;
  result.cache.rows.resize(batch.size());
  result.logits.resize(batch.size());

  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& ids = batch[r].ids;
    const int t_len = static_cast<int>(ids.size());
    RowCache& row = result.cache.rows[r];
    row.ids = ids;
    row.layers.resize(static_cast<std::size_t>(cfg.layers));

    Tensor x(t_len, dim);
    for (int t = 0; t < t_len; ++t) {
      const double* tok = params.tok_emb.row(ids[static_cast<std::size_t>(t)]);
      const double* pos = params.pos_emb.row(t);
      double* xr = x.row(t);
      for (int c = 0; c < dim; ++c) xr[c] = tok[c] + pos[c];
    }

    for (int l = 0; l < cfg.layers; ++l) {
      const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
      LayerCache& lc = row.layers[static_cast<std::size_t>(l)];

      // Attention sublayer with pre-norm.
      lc.xhat1 = Tensor(t_len, dim);
      lc.a = Tensor(t_len, dim);
      lc.rstd1.resize(static_cast<std::size_t>(t_len));
      for (int t = 0; t < t_len; ++t) {
        layer_norm_row(x.row(t), lp.ln1_g.row(0), lp.ln1_b.row(0), dim, lc.xhat1.row(t),
                       &lc.rstd1[static_cast<std::size_t>(t)], lc.a.row(t));
      }

      gemm_nn(lc.a, lp.wq, lc.q);
      add_bias_rows(lc.q, lp.bq);
      gemm_nn(lc.a, lp.wk, lc.k);
      add_bias_rows(lc.k, lp.bk);
      gemm_nn(lc.a, lp.wv, lc.v);
      add_bias_rows(lc.v, lp.bv);

      lc.probs = Tensor(heads * t_len, t_len);
      lc.ctx = Tensor(t_len, dim);
      for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < t_len; ++i) {
          double* prow = lc.probs.row(h * t_len + i);
          const double* qi = lc.q.row(i) + off;
          double best = -1e300;
          for (int j = 0; j < t_len; ++j) {
            if (ids[static_cast<std::size_t>(j)] == Vocab::kPad) continue;
            const double* kj = lc.k.row(j) + off;
            double s = 0.0;
            for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
            s *= att_scale;
            prow[j] = s;
            if (s > best) best = s;
          }
          double denom = 0.0;
          for (int j = 0; j < t_len; ++j) {
            if (ids[static_cast<std::size_t>(j)] == Vocab::kPad) {
              prow[j] = 0.0;
              continue;
            }
            prow[j] = std::exp(prow[j] - best);
            denom += prow[j];
          }
          const double inv = 1.0 / denom;
          double* ci = lc.ctx.row(i) + off;
          for (int j = 0; j < t_len; ++j) {
            prow[j] *= inv;
            if (prow[j] != 0.0) {
              const double* vj = lc.v.row(j) + off;
              const double p = prow[j];
              for (int c = 0; c < dh; ++c) ci[c] += p * vj[c];
            }
          }
        }
      }

      Tensor attn_out;
      gemm_nn(lc.ctx, lp.wo, attn_out);
      add_bias_rows(attn_out, lp.bo);
      if (use_dropout) {
        lc.attn_mask = sample_dropout_mask(t_len, dim, cfg.dropout_rate, *dropout_rng);
        apply_mask(attn_out, lc.attn_mask);
      }
      for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += attn_out.v[i];

      // Feed-forward sublayer with pre-norm.
      lc.xhat2 = Tensor(t_len, dim);
      lc.bln = Tensor(t_len, dim);
      lc.rstd2.resize(static_cast<std::size_t>(t_len));
      for (int t = 0; t < t_len; ++t) {
        layer_norm_row(x.row(t), lp.ln2_g.row(0), lp.ln2_b.row(0), dim, lc.xhat2.row(t),
                       &lc.rstd2[static_cast<std::size_t>(t)], lc.bln.row(t));
      }
      gemm_nn(lc.bln, lp.w1, lc.h1);
      add_bias_rows(lc.h1, lp.b1);
      lc.act = Tensor(t_len, cfg.ffn_dim);
      for (std::size_t i = 0; i < lc.h1.v.size(); ++i) lc.act.v[i] = gelu(lc.h1.v[i]);
      Tensor ffn_out;
      gemm_nn(lc.act, lp.w2, ffn_out);
      add_bias_rows(ffn_out, lp.b2);
      if (use_dropout) {
        lc.ffn_mask = sample_dropout_mask(t_len, dim, cfg.dropout_rate, *dropout_rng);
        apply_mask(ffn_out, lc.ffn_mask);
      }
      for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += ffn_out.v[i];
    }

    // Final norm at the [CLS] position, then the head.
    row.xhat_f.resize(static_cast<std::size_t>(dim));
    row.u.resize(static_cast<std::size_t>(dim));
    layer_norm_row(x.row(0), params.lnf_g.row(0), params.lnf_b.row(0), dim, row.xhat_f.data(),
                   &row.rstd_f, row.u.data());
    for (int k = 0; k < EncoderConfig::kNumClasses; ++k) {
      double s = params.head_b.at(0, k);
      for (int c = 0; c < dim; ++c) s += row.u[static_cast<std::size_t>(c)] * params.head_w.at(c, k);
      result.logits[r][static_cast<std::size_t>(k)] = s;
    }
  }
  return result;
}

EncoderParams backward(const EncoderParams& params, const ForwardCache& cache,
                       const std::vector<std::array<double, 3>>& grad_logits) {
  const EncoderConfig& cfg = params.cfg;
  if (cache.cfg != cfg) throw std::invalid_argument("backward: cache built for another config");
  if (grad_logits.size() != cache.rows.size()) {
    throw std::invalid_argument("backward: grad_logits batch size mismatch");
  }
  const int dim = cfg.dim;
  const int heads = cfg.heads;
  const int dh = cfg.head_dim();
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool use_dropout = cache.train_mode && cfg.dropout_rate > 0.0;

  EncoderParams grads = zeros_like(params);

  for (std::size_t r = 0; r < cache.rows.size(); ++r) {
    const RowCache& row = cache.rows[r];
    const int t_len = static_cast<int>(row.ids.size());
    const auto& dlogit = grad_logits[r];

    // Head and final norm.
    std::vector<double> du(static_cast<std::size_t>(dim), 0.0);
    for (int c = 0; c < dim; ++c) {
      const double uc = row.u[static_cast<std::size_t>(c)];
      for (int k = 0; k < EncoderConfig::kNumClasses; ++k) {
        grads.head_w.at(c, k) += uc * dlogit[static_cast<std::size_t>(k)];
        du[static_cast<std::size_t>(c)] += params.head_w.at(c, k) * dlogit[static_cast<std::size_t>(k)];
      }
    }
    for (int k = 0; k < EncoderConfig::kNumClasses; ++k) {
      grads.head_b.at(0, k) += dlogit[static_cast<std::size_t>(k)];
    }

    Tensor dx(t_len, dim);
    layer_norm_row_backward(du.data(), row.xhat_f.data(), row.rstd_f, params.lnf_g.row(0), dim,
                            grads.lnf_g.row(0), grads.lnf_b.row(0), dx.row(0));

    for (int l = cfg.layers - 1; l >= 0; --l) {
      const LayerParams& lp = params.layers[static_cast<std::size_t>(l)];
      LayerParams& lg = grads.layers[static_cast<std::size_t>(l)];
      const LayerCache& lc = row.layers[static_cast<std::size_t>(l)];

      // FFN sublayer backward: x_out = x_mid + drop(W2 gelu(W1 LN2(x_mid))).
      Tensor dffn = dx;  // gradient wrt the sublayer output branch
      if (use_dropout && lc.ffn_mask.size() > 0) apply_mask(dffn, lc.ffn_mask);
      gemm_tn(lc.act, dffn, lg.w2, /*accumulate=*/true);
      accum_col_sums(dffn, lg.b2);
      Tensor dact;
      gemm_nt(dffn, lp.w2, dact);
      for (std::size_t i = 0; i < dact.v.size(); ++i) dact.v[i] *= gelu_grad(lc.h1.v[i]);
      gemm_tn(lc.bln, dact, lg.w1, /*accumulate=*/true);
      accum_col_sums(dact, lg.b1);
      Tensor dbln;
      gemm_nt(dact, lp.w1, dbln);
      for (int t = 0; t < t_len; ++t) {
        std::vector<double> tmp(static_cast<std::size_t>(dim));
        layer_norm_row_backward(dbln.row(t), lc.xhat2.row(t), lc.rstd2[static_cast<std::size_t>(t)],
                                lp.ln2_g.row(0), dim, lg.ln2_g.row(0), lg.ln2_b.row(0), tmp.data());
        double* dxr = dx.row(t);
        for (int c = 0; c < dim; ++c) dxr[c] += tmp[static_cast<std::size_t>(c)];
      }

      // Attention sublayer backward: x_mid = x_in + drop(Wo ctx + bo).
      Tensor dattn = dx;
      if (use_dropout && lc.attn_mask.size() > 0) apply_mask(dattn, lc.attn_mask);
      gemm_tn(lc.ctx, dattn, lg.wo, /*accumulate=*/true);
      accum_col_sums(dattn, lg.bo);
      Tensor dctx;
      gemm_nt(dattn, lp.wo, dctx);

      Tensor dq(t_len, dim);
      Tensor dk(t_len, dim);
      Tensor dv(t_len, dim);
      std::vector<double> ds(static_cast<std::size_t>(t_len));
      for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < t_len; ++i) {
          const double* prow = lc.probs.row(h * t_len + i);
          const double* dctx_i = dctx.row(i) + off;

          // dL/dp and the softmax Jacobian, restricted to attended keys.
          double dot = 0.0;
          for (int j = 0; j < t_len; ++j) {
            if (prow[j] == 0.0) {
              ds[static_cast<std::size_t>(j)] = 0.0;
              continue;
            }
            const double* vj = lc.v.row(j) + off;
            double dp = 0.0;
            for (int c = 0; c < dh; ++c) dp += dctx_i[c] * vj[c];
            ds[static_cast<std::size_t>(j)] = dp;
            dot += dp * prow[j];
          }
          for (int j = 0; j < t_len; ++j) {
            const double p = prow[j];
            if (p == 0.0) continue;
            const double dsj = p * (ds[static_cast<std::size_t>(j)] - dot);
            ds[static_cast<std::size_t>(j)] = dsj;

            double* dvj = dv.row(j) + off;
            for (int c = 0; c < dh; ++c) dvj[c] += p * dctx_i[c];
          }

          double* dqi = dq.row(i) + off;
          const double* qi = lc.q.row(i) + off;
          for (int j = 0; j < t_len; ++j) {
            const double dsj = ds[static_cast<std::size_t>(j)];
            if (dsj == 0.0) continue;
            const double* kj = lc.k.row(j) + off;
            double* dkj = dk.row(j) + off;
            const double w = dsj * att_scale;
            for (int c = 0; c < dh; ++c) {
              dqi[c] += w * kj[c];
              dkj[c] += w * qi[c];
            }
          }
        }
      }

      gemm_tn(lc.a, dq, lg.wq, /*accumulate=*/true);
      accum_col_sums(dq, lg.bq);
      gemm_tn(lc.a, dk, lg.wk, /*accumulate=*/true);
      accum_col_sums(dk, lg.bk);
      gemm_tn(lc.a, dv, lg.wv, /*accumulate=*/true);
      accum_col_sums(dv, lg.bv);

      Tensor da;
      gemm_nt(dq, lp.wq, da);
      gemm_nt(dk, lp.wk, da, /*accumulate=*/true);
      gemm_nt(dv, lp.wv, da, /*accumulate=*/true);

      for (int t = 0; t < t_len; ++t) {
        std::vector<double> tmp(static_cast<std::size_t>(dim));
        layer_norm_row_backward(da.row(t), lc.xhat1.row(t), lc.rstd1[static_cast<std::size_t>(t)],
                                lp.ln1_g.row(0), dim, lg.ln1_g.row(0), lg.ln1_b.row(0), tmp.data());
        double* dxr = dx.row(t);
        for (int c = 0; c < dim; ++c) dxr[c] += tmp[static_cast<std::size_t>(c)];
      }
    }

    for (int t = 0; t < t_len; ++t) {
      const double* dxr = dx.row(t);
      double* tok = grads.tok_emb.row(row.ids[static_cast<std::size_t>(t)]);
      double* pos = grads.pos_emb.row(t);
      for (int c = 0; c < dim; ++c) {
        tok[c] += dxr[c];
        pos[c] += dxr[c];
      }
    }
  }
  return grads;
}

std::vector<int> predict(const EncoderParams& params, const std::vector<InputSequence>& batch) {
  auto result = forward(params, batch, /*train_mode=*/false);
  std::vector<int> labels;
  labels.reserve(result.logits.size());
  for (const auto& row : result.logits) labels.push_back(argmax_label(row));
  return labels;
}

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'C', 'L', 'M', 'C', 'K', 'P', '1'};

void write_u64_le(std::ostream& out, std::uint64_t x) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((x >> (8 * i)) & 0xFFU);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return x;
}

void write_f64_le(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64_le(out, bits);
}

double read_f64_le(std::istream& in) {
  const std::uint64_t bits = read_u64_le(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64_le(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_u64_le(in);
  if (n > (1U << 20)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const EncoderConfig& c = params.cfg;
  write_u64_le(out, static_cast<std::uint64_t>(c.vocab_size));
  write_u64_le(out, static_cast<std::uint64_t>(c.dim));
  write_u64_le(out, static_cast<std::uint64_t>(c.layers));
  write_u64_le(out, static_cast<std::uint64_t>(c.heads));
  write_u64_le(out, static_cast<std::uint64_t>(c.ffn_dim));
  write_u64_le(out, static_cast<std::uint64_t>(c.max_len));
  write_f64_le(out, c.dropout_rate);

  const auto entries = tensor_entries(params);
  write_u64_le(out, entries.size());
  for (const auto& [name, t] : entries) {
    write_string(out, name);
    write_u64_le(out, static_cast<std::uint64_t>(t->rows));
    write_u64_le(out, static_cast<std::uint64_t>(t->cols));
    for (double d : t->v) write_f64_le(out, d);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path.string());
  }
  EncoderConfig cfg;
  cfg.vocab_size = static_cast<int>(read_u64_le(in));
  cfg.dim = static_cast<int>(read_u64_le(in));
  cfg.layers = static_cast<int>(read_u64_le(in));
  cfg.heads = static_cast<int>(read_u64_le(in));
  cfg.ffn_dim = static_cast<int>(read_u64_le(in));
  cfg.max_len = static_cast<int>(read_u64_le(in));
  cfg.dropout_rate = read_f64_le(in);
  cfg.validate();

  EncoderParams p = allocate_params(cfg);
  auto entries = tensor_entries(p);
  const auto count = read_u64_le(in);
  if (count != entries.size()) {
    throw std::runtime_error("checkpoint: tensor count mismatch in " + path.string());
  }
  for (auto& [name, t] : entries) {
    const std::string stored = read_string(in);
    if (stored != name) {
      throw std::runtime_error("checkpoint: expected tensor \"" + name + "\", found \"" + stored +
                               "\"");
    }
    const auto rows = static_cast<int>(read_u64_le(in));
    const auto cols = static_cast<int>(read_u64_le(in));
    if (rows != t->rows || cols != t->cols) {
      throw std::runtime_error("checkpoint: shape mismatch for tensor \"" + name + "\"");
    }
    for (double& d : t->v) d = read_f64_le(in);
  }
  return p;
}

EncoderParams load_checkpoint(const std::filesystem::path& path, const EncoderConfig& expected) {
  EncoderParams p = load_checkpoint(path);
  if (!(p.cfg == expected)) {
    throw std::runtime_error("checkpoint config does not match the requested encoder config: " +
                             path.string());
  }
  return p;
}

}  // namespace pclmatch
