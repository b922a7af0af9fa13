#pragma once

#include <vector>

#include "coqan/config.hpp"
#include "coqan/features.hpp"
#include "coqan/layers.hpp"

namespace coqan {

template <class T>
nn::Matrix<T> layout_matrix(const std::vector<LayoutVector>& vectors) {
  nn::Matrix<T> m(static_cast<Eigen::Index>(vectors.size()), static_cast<Eigen::Index>(kLayoutDim));
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t k = 0; k < kLayoutDim; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = static_cast<T>(vectors[i][k]);
  }
  return m;
}

// GRU over the block sequence (last state) next to a multi-window
// convolution with max-over-time pooling; h_l = h_M | h_c.
template <class T>
class LayoutNet {
 public:
  LayoutNet() = default;

  LayoutNet(nn::ParameterStore<T>& s, const LayoutConfig& cfg) : cfg_(cfg) {
    gru_ = nn::Gru<T>::declare(s, "layout.gru", cfg.input_dim, cfg.gru_hidden, nn::Group::other);
    conv_ = nn::ConvMaxPool<T>::declare(s, "layout.conv", cfg.input_dim, cfg.windows,
                                        cfg.filters_per_window, nn::Group::other);
  }

  const LayoutConfig& config() const { return cfg_; }
  std::size_t output_dim() const { return cfg_.output_dim(); }
  const nn::Gru<T>& gru() const { return gru_; }
  const nn::ConvMaxPool<T>& conv() const { return conv_; }

  nn::Var<T> forward(nn::Var<T> blocks) const {
    if (blocks.rows() == 0) throw ValidationError("article has no blocks");
    if (blocks.rows() > static_cast<Eigen::Index>(kMaxBlocks))
      throw ValidationError("article has more than " + std::to_string(kMaxBlocks) + " blocks");
    nn::Var<T> last = gru_.sequence(blocks).back();
    return nn::concat_cols<T>({last, conv_(blocks)});
  }

  nn::Var<T> forward(nn::Tape<T>& t, const nn::Matrix<T>& blocks) const {
    if (blocks.rows() == 0) throw ValidationError("article has no blocks");
    return forward(t.constant(blocks));
  }

 private:
  LayoutConfig cfg_;
  nn::Gru<T> gru_;
  nn::ConvMaxPool<T> conv_;
};

}  // namespace coqan
