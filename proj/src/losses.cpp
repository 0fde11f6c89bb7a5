#include <memory>
#include <stdexcept>

#include "svc/nn/ops.hpp"
#include "svc/vocoder.hpp"

namespace svc {

std::vector<nn::Tensor> scores_of(const std::vector<DiscOutput>& outs) {
  std::vector<nn::Tensor> s;
  s.reserve(outs.size());
  for (const auto& o : outs) s.push_back(o.score);
  return s;
}

nn::Tensor discriminator_adv_loss(const std::vector<nn::Tensor>& real_scores,
                                  const std::vector<nn::Tensor>& fake_scores) {
  if (real_scores.size() != fake_scores.size() || real_scores.empty())
    throw std::invalid_argument("discriminator loss: score lists differ in size");
  std::vector<nn::Tensor> terms;
  for (std::size_t i = 0; i < real_scores.size(); ++i) {
    terms.push_back(nn::mse_to_constant(real_scores[i], 1.0));
    terms.push_back(nn::mse_to_constant(fake_scores[i], 0.0));
  }
  return nn::weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

nn::Tensor generator_adv_loss(const std::vector<nn::Tensor>& fake_scores) {
  if (fake_scores.empty())
    throw std::invalid_argument("generator loss: no scores");
  std::vector<nn::Tensor> terms;
  for (const auto& s : fake_scores) terms.push_back(nn::mse_to_constant(s, 1.0));
  return nn::weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

nn::Tensor feature_matching_loss(const std::vector<DiscOutput>& real,
                                 const std::vector<DiscOutput>& fake) {
  if (real.size() != fake.size() || real.empty())
    throw std::invalid_argument("feature loss: output lists differ in size");
  std::vector<nn::Tensor> terms;
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (real[i].features.size() != fake[i].features.size())
      throw std::invalid_argument("feature loss: layer counts differ");
    for (std::size_t j = 0; j < real[i].features.size(); ++j)
      terms.push_back(nn::l1_loss(real[i].features[j], fake[i].features[j]));
  }
  return nn::weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
}

nn::Tensor mel_l1_loss(const nn::Tensor& wave,
                       const std::vector<MelSpectrogram>& reference,
                       const MelAnalyzer& analyzer) {
  if (wave.rank() != 3 || wave.dim(1) != 1 || wave.dim(0) != reference.size())
    throw std::invalid_argument("mel loss: expected [N, 1, L] and N references");
  const std::size_t n = wave.dim(0), len = wave.dim(2);
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool need_grad = nn::grad_enabled() && wave.requires_grad();
  auto grad = std::make_shared<std::vector<double>>(need_grad ? n * len : 0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto samples = wave.data().subspan(i * len, len);
    std::span<double> g;
    if (need_grad) g = std::span<double>(*grad).subspan(i * len, len);
    loss += inv_n * analyzer.l1_distance(samples, reference[i], g, inv_n);
  }
  return nn::make_result({1}, {loss}, {wave}, [grad](nn::Node& self) {
    auto gx = self.inputs[0]->grad_buffer();
    const double up = self.grad[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += up * (*grad)[i];
  });
}

GanLossValues gan_losses(const nn::Tensor& real, const nn::Tensor& fake,
                         const Discriminators& disc,
                         const MelAnalyzer& analyzer) {
  if (real.shape() != fake.shape())
    throw std::invalid_argument("gan_losses: real and fake lengths differ (" +
                                nn::shape_str(real.shape()) + " vs " +
                                nn::shape_str(fake.shape()) + ")");
  nn::NoGradGuard guard;
  const auto r = disc.forward(real);
  const auto f = disc.forward(fake);
  GanLossValues v;
  v.adv_d = discriminator_adv_loss(scores_of(r), scores_of(f)).item();
  v.adv_g = generator_adv_loss(scores_of(f)).item();
  v.fm = feature_matching_loss(r, f).item();
  std::vector<MelSpectrogram> refs;
  const std::size_t len = real.dim(2);
  for (std::size_t i = 0; i < real.dim(0); ++i)
    refs.push_back(analyzer.compute(real.data().subspan(i * len, len)));
  v.mel = mel_l1_loss(fake, refs, analyzer).item();
  return v;
}

}  // namespace svc
