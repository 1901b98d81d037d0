#include "shiftcal/featlearn.hpp"

#include <algorithm>
#include <cmath>

#include "shiftcal/discriminator.hpp"

namespace shiftcal {

namespace {

// Mean sigmoid output of head(psi(features)) over a pool.
double mean_disc_output(const DenseNet& psi, const DenseNet& head, const Matrix& feats) {
  Matrix z = forward_batch(head, forward_batch(psi, feats));
  double sum = 0.0;
  for (int i = 0; i < z.rows; ++i) sum += sigmoid(z.at(i, 0));
  return sum / z.rows;
}

double disc_training_loss(const DenseNet& psi, const DenseNet& head, const Matrix& inputs,
                          const std::vector<double>& s) {
  Matrix z = forward_batch(head, forward_batch(psi, inputs));
  double loss = 0.0;
  for (int i = 0; i < z.rows; ++i) {
    double diff = sigmoid(z.at(i, 0)) - s[i];
    loss += diff * diff;
  }
  return loss / z.rows;
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& idx, int start, int len) {
  Matrix out(len, m.cols);
  for (int r = 0; r < len; ++r)
    std::copy(m.row(idx[start + r]), m.row(idx[start + r]) + m.cols, out.row(r));
  return out;
}

void apply_step(DenseNet& net, const NetGradients& grads, double lr) {
  for (size_t li = 0; li < net.layers.size(); ++li) {
    DenseLayer& l = net.layers[li];
    for (size_t j = 0; j < l.weights.data.size(); ++j)
      l.weights.data[j] -= lr * grads.weights[li].data[j];
    for (size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= lr * grads.bias[li][j];
  }
}

DropoutMasks draw_masks(const DenseNet& net, int rows, double rate, Rng& rng) {
  DropoutMasks masks;
  masks.masks.resize(net.layers.size());
  if (rate <= 0.0) return masks;
  double keep = 1.0 - rate;
  for (size_t li = 0; li + 1 < net.layers.size(); ++li) {
    Matrix m(rows, net.layers[li].out_dim());
    for (double& v : m.data) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
    masks.masks[li] = std::move(m);
  }
  return masks;
}

}  // namespace

PsiArtifacts train_indistinguishable(const Matrix& source_features, const Matrix& source_onehot,
                                     const Matrix& target_features,
                                     const AdversarialConfig& config,
                                     const DenseNet* label_head_init) {
  config.validate();
  if (source_features.rows == 0 || target_features.rows == 0)
    throw std::invalid_argument("train_indistinguishable: empty pool");
  if (source_features.cols != target_features.cols)
    throw std::invalid_argument("train_indistinguishable: feature dimensions differ");

  const int d = source_features.cols;
  const int K = source_onehot.cols;
  const int ns = source_features.rows;
  Rng rng(config.seed);

  // psi starts at the identity so the classifier's features survive the first
  // epochs; adversarial pressure then bends them gradually.
  PsiArtifacts art;
  art.psi = make_dense_net({d, d}, {Activation::Identity}, rng);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c)
      art.psi.layers[0].weights.at(r, c) = (r == c ? 1.0 : 0.0) + rng.uniform(-0.05, 0.05);
    art.psi.layers[0].bias[r] = 0.0;
  }
  if (label_head_init) {
    if (label_head_init->input_dim() != d || label_head_init->output_dim() != K)
      throw std::invalid_argument("train_indistinguishable: warm-start head shape mismatch");
    art.label_head = *label_head_init;
  } else {
    art.label_head = make_dense_net({d, K}, {Activation::Identity}, rng);
  }
  art.disc_head = make_dense_net({d, d, 1}, {Activation::Tanh, Activation::Identity}, rng);

  // Balanced discrimination pool on the raw (pre-psi) features.
  const int m = std::min(ns, target_features.rows);
  Matrix disc_inputs(2 * m, d);
  std::vector<double> disc_s(2 * m);
  for (int i = 0; i < m; ++i) {
    std::copy(source_features.row(i), source_features.row(i) + d, disc_inputs.row(i));
    disc_s[i] = 1.0;
    std::copy(target_features.row(i), target_features.row(i) + d, disc_inputs.row(m + i));
    disc_s[m + i] = 0.0;
  }

  std::vector<int> disc_order(2 * m), src_order(ns);
  for (int i = 0; i < 2 * m; ++i) disc_order[i] = i;
  for (int i = 0; i < ns; ++i) src_order[i] = i;

  ForwardCache psi_cache, head_cache;
  Matrix d_head_in;
  art.halt_reason = "max_epochs";
  int confident_run = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(disc_order);
    rng.shuffle(src_order);
    double epoch_label_loss = 0.0;
    int gen_steps = 0;
    int src_pos = 0;

    for (int start = 0; start < 2 * m; start += config.batch_size) {
      int len = std::min(config.batch_size, 2 * m - start);
      Matrix bx = gather_rows(disc_inputs, disc_order, start, len);
      Matrix bs(len, 1);
      for (int r = 0; r < len; ++r) bs.at(r, 0) = disc_s[disc_order[start + r]];
      std::vector<double> ones(len, 1.0);

      // Discriminator updates on the current psi features.
      for (int step = 0; step < config.disc_steps_per_gen; ++step) {
        Matrix psi_out = forward_batch(art.psi, bx);
        DropoutMasks masks = draw_masks(art.disc_head, len, config.dropout, rng);
        const Matrix& z = forward_cached(art.disc_head, psi_out, head_cache, &masks);
        Matrix dz;
        double loss = batch_loss(LossKind::SigmoidBrier, z, bs, ones, &dz);
        if (!std::isfinite(loss))
          throw DivergedError("train_indistinguishable: discriminator loss diverged", epoch);
        NetGradients dg(art.disc_head);
        backward(art.disc_head, head_cache, dz, dg, nullptr, &masks);
        apply_step(art.disc_head, dg, config.disc_learning_rate);
      }

      // Generator step: label Brier on a source batch ...
      int slen = std::min(config.batch_size, ns);
      if (src_pos + slen > ns) src_pos = 0;
      Matrix sx = gather_rows(source_features, src_order, src_pos, slen);
      Matrix sy(slen, K);
      for (int r = 0; r < slen; ++r)
        std::copy(source_onehot.row(src_order[src_pos + r]),
                  source_onehot.row(src_order[src_pos + r]) + K, sy.row(r));
      src_pos += slen;
      std::vector<double> sones(slen, 1.0);

      const Matrix& psi_src = forward_cached(art.psi, sx, psi_cache);
      const Matrix& zf = forward_cached(art.label_head, psi_src, head_cache);
      Matrix dzf;
      double label_loss = batch_loss(LossKind::SoftmaxBrier, zf, sy, sones, &dzf);
      if (!std::isfinite(label_loss))
        throw DivergedError("train_indistinguishable: label loss diverged", epoch);
      NetGradients g_label(art.label_head);
      backward(art.label_head, head_cache, dzf, g_label, &d_head_in);
      NetGradients g_psi(art.psi);
      backward(art.psi, psi_cache, d_head_in, g_psi);

      // ... minus lambda_d times the discrimination loss on the mixed batch.
      if (config.lambda_d > 0.0) {
        const Matrix& psi_mix = forward_cached(art.psi, bx, psi_cache);
        const Matrix& zd = forward_cached(art.disc_head, psi_mix, head_cache);
        Matrix dzd;
        batch_loss(LossKind::SigmoidBrier, zd, bs, ones, &dzd);
        for (double& v : dzd.data) v *= -config.lambda_d;
        NetGradients g_disc(art.disc_head);
        backward(art.disc_head, head_cache, dzd, g_disc, &d_head_in);
        NetGradients g_psi_adv(art.psi);
        backward(art.psi, psi_cache, d_head_in, g_psi_adv);
        g_psi.add_scaled(g_psi_adv, 1.0);
      }

      apply_step(art.label_head, g_label, config.gen_learning_rate);
      apply_step(art.psi, g_psi, config.gen_learning_rate);
      epoch_label_loss += label_loss;
      ++gen_steps;
    }

    if (!art.psi.finite() || !art.label_head.finite() || !art.disc_head.finite())
      throw DivergedError("train_indistinguishable: parameters diverged", epoch);

    double dloss = disc_training_loss(art.psi, art.disc_head, disc_inputs, disc_s);
    art.disc_loss_trace.push_back(dloss);
    art.label_loss_trace.push_back(gen_steps ? epoch_label_loss / gen_steps : 0.0);

    double src_mean = mean_disc_output(art.psi, art.disc_head, source_features);
    double tgt_mean = mean_disc_output(art.psi, art.disc_head, target_features);
    bool confident = src_mean > config.confident_hi && tgt_mean < config.confident_lo;
    confident_run = confident ? confident_run + 1 : 0;

    if (epoch + 1 < config.min_epochs) continue;
    if (confident_run >= config.confident_patience) {
      art.halt_reason = "early_stop";
      break;
    }
    bool below = dloss < config.stop_threshold;
    if (config.stop_below_threshold == below) {
      art.halt_reason = "threshold";
      break;
    }
  }
  return art;
}

DenseNet retrain_discriminator(const DenseNet& psi, const Matrix& source_features,
                               const Matrix& target_features, const SgdConfig& config) {
  Matrix src = forward_batch(psi, source_features);
  Matrix tgt = forward_batch(psi, target_features);
  DiscriminationSet set = build_discrimination_set(src, tgt, mix_seed(config.seed, 0x7265));
  return train_discriminator(set, config);
}

}  // namespace shiftcal
