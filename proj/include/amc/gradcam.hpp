#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "amc/model.hpp"

namespace amc {

struct Heatmap {
  Tensor values;  // H x W, in [0, 1]
  std::string source_layer;
  int class_index = 0;

  std::size_t height() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }
};

/// Grad-CAM arithmetic on one image: channel weights are the spatial mean of
/// `gradient`, the map is ReLU(sum_k w_k A_k), bilinearly resized to
/// out_h x out_w and divided by its maximum. Both inputs are C x h x w.
Tensor class_activation_map(const Tensor& activation, const Tensor& gradient, std::size_t out_h,
                            std::size_t out_w);

/// Half-pixel-centre bilinear resize of an H x W map, edge-clamped.
Tensor resize_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w);

/// Heatmap over the activation feeding global average pooling. `image` is
/// C x H x W (or 1 x C x H x W); the class defaults to the predicted one.
/// Leaves the model's parameter gradients zeroed.
Heatmap gradcam(Model& model, const Tensor& image, std::optional<int> target_class = {});

/// Blue -> cyan -> yellow -> red "jet" colormap: r = clamp(1.5 - |4v - 3|),
/// g = clamp(1.5 - |4v - 2|), b = clamp(1.5 - |4v - 1|) for v in [0, 1].
struct Rgb {
  double r, g, b;
};
Rgb jet(double v);

/// 8-bit RGB overlay: round(255 * (0.5 * pixel + 0.5 * jet(heat))), with the
/// image min-max scaled to [0, 1] per image and grey inputs replicated to RGB.
/// Returned as H x W x 3 bytes, row-major.
std::vector<unsigned char> overlay_pixels(const Heatmap& heatmap, const Tensor& image);

void export_overlay(const Heatmap& heatmap, const Tensor& image, const std::filesystem::path& path);
/// The heatmap itself through the colormap, no blending.
void export_heatmap_png(const Heatmap& heatmap, const std::filesystem::path& path);
void export_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path);

/// Share of the total map mass held by the top 10% of pixels. 0 for an all-zero map.
double top_decile_mass(const Heatmap& heatmap);

}  // namespace amc
