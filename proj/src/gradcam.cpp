#include "amc/gradcam.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include "amc/losses.hpp"
#include "amc/ops.hpp"

namespace amc {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

unsigned char to_byte(double v) { return static_cast<unsigned char>(std::lround(255.0 * clamp01(v))); }

void write_png(const std::vector<unsigned char>& rgb, std::size_t h, std::size_t w,
               const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot write " + path.string() + ": " + msg);
  }
}

std::string final_conv_name(const ArchitectureSpec& spec) {
  std::size_t convs = 0;
  for (const auto& l : spec.layers) convs += l.kind == LayerKind::conv;
  return "conv" + std::to_string(convs);
}

}  // namespace

Tensor resize_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w) {
  require_rank(map, 2, "resize_bilinear");
  const std::size_t in_h = map.dim(0), in_w = map.dim(1);
  Tensor out({out_h, out_w});
  const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
  auto axis = [](double pos, std::size_t n, std::size_t& i0, std::size_t& i1, double& f) {
    pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<std::size_t>(std::floor(pos));
    i1 = std::min(i0 + 1, n - 1);
    f = pos - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double fy;
    axis((static_cast<double>(y) + 0.5) * sy - 0.5, in_h, y0, y1, fy);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double fx;
      axis((static_cast<double>(x) + 0.5) * sx - 0.5, in_w, x0, x1, fx);
      const double top = (1.0 - fx) * map.at(y0, x0) + fx * map.at(y0, x1);
      const double bottom = (1.0 - fx) * map.at(y1, x0) + fx * map.at(y1, x1);
      out.at(y, x) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

Tensor class_activation_map(const Tensor& activation, const Tensor& gradient, std::size_t out_h,
                            std::size_t out_w) {
  require_rank(activation, 3, "class_activation_map");
  if (activation.shape() != gradient.shape())
    throw ShapeError("class_activation_map: activation " + to_string(activation.shape()) +
                     " vs gradient " + to_string(gradient.shape()));
  const std::size_t c = activation.dim(0), h = activation.dim(1), w = activation.dim(2);
  const std::size_t hw = h * w;
  Tensor cam({h, w}, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    double weight = 0.0;
    for (std::size_t i = 0; i < hw; ++i) weight += gradient[k * hw + i];
    weight /= static_cast<double>(hw);
    for (std::size_t i = 0; i < hw; ++i) cam[i] += weight * activation[k * hw + i];
  }
  for (std::size_t i = 0; i < hw; ++i) cam[i] = std::max(cam[i], 0.0);

  Tensor out = resize_bilinear(cam, out_h, out_w);
  double peak = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) peak = std::max(peak, out[i]);
  if (peak > 0.0)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i] / peak, 1.0);
  return out;
}

Heatmap gradcam(Model& model, const Tensor& image, std::optional<int> target_class) {
  const ArchitectureSpec& spec = model.spec();
  const Shape expected{spec.in_channels, spec.in_height, spec.in_width};
  Tensor input;
  if (image.shape() == expected)
    input = image.reshaped({1, spec.in_channels, spec.in_height, spec.in_width});
  else if (image.rank() == 4 && image.dim(0) == 1 &&
           Shape(image.shape().begin() + 1, image.shape().end()) == expected)
    input = image;
  else
    throw ShapeError("gradcam: image " + to_string(image.shape()) + " does not fit " + spec.name +
                     " input " + to_string(expected));

  Tape tape;
  Rng unused(0);
  const ForwardResult fr = forward(model, tape, tape.constant(input), Mode::eval, unused);
  const int classes = static_cast<int>(spec.num_classes);
  int cls = target_class.value_or(static_cast<int>(argmax_row(fr.logits.value(), 0)));
  if (cls < 0 || cls >= classes)
    throw ConfigError("gradcam: class index " + std::to_string(cls) + " outside [0, " +
                      std::to_string(classes) + ")");

  tape.backward(ops::pick(fr.logits, static_cast<std::size_t>(cls)));
  Tensor activation = fr.final_conv.value();
  Tensor gradient = tape.grad(fr.final_conv);
  model.zero_grad();
  const Shape& s = activation.shape();
  const Shape chw{s[1], s[2], s[3]};

  Heatmap hm;
  hm.values = class_activation_map(activation.reshaped(chw), gradient.reshaped(chw),
                                   spec.in_height, spec.in_width);
  hm.source_layer = final_conv_name(spec);
  hm.class_index = cls;
  return hm;
}

Rgb jet(double v) {
  v = clamp01(v);
  return {clamp01(1.5 - std::abs(4.0 * v - 3.0)), clamp01(1.5 - std::abs(4.0 * v - 2.0)),
          clamp01(1.5 - std::abs(4.0 * v - 1.0))};
}

std::vector<unsigned char> overlay_pixels(const Heatmap& heatmap, const Tensor& image) {
  const std::size_t h = heatmap.height(), w = heatmap.width();
  Tensor img = image;
  if (img.rank() == 4 && img.dim(0) == 1) img = img.reshaped({img.dim(1), img.dim(2), img.dim(3)});
  if (img.rank() != 3 || img.dim(1) != h || img.dim(2) != w || (img.dim(0) != 1 && img.dim(0) != 3))
    throw ShapeError("export_overlay: image " + to_string(image.shape()) + " is not aligned with a " +
                     std::to_string(h) + "x" + std::to_string(w) + " heatmap");
  const std::size_t channels = img.dim(0);
  double lo = img[0], hi = img[0];
  for (std::size_t i = 0; i < img.size(); ++i) {
    lo = std::min(lo, img[i]);
    hi = std::max(hi, img[i]);
  }
  const double range = hi - lo;
  auto pixel = [&](std::size_t c, std::size_t y, std::size_t x) {
    const double v = img[(c * h + y) * w + x];
    return range > 0.0 ? (v - lo) / range : 0.0;
  };

  std::vector<unsigned char> rgb(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const Rgb c = jet(heatmap.values.at(y, x));
      const double heat[3] = {c.r, c.g, c.b};
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double base = pixel(channels == 3 ? ch : 0, y, x);
        rgb[(y * w + x) * 3 + ch] = to_byte(0.5 * base + 0.5 * heat[ch]);
      }
    }
  return rgb;
}

void export_overlay(const Heatmap& heatmap, const Tensor& image, const std::filesystem::path& path) {
  write_png(overlay_pixels(heatmap, image), heatmap.height(), heatmap.width(), path);
}

void export_heatmap_png(const Heatmap& heatmap, const std::filesystem::path& path) {
  const std::size_t h = heatmap.height(), w = heatmap.width();
  std::vector<unsigned char> rgb(h * w * 3);
  for (std::size_t i = 0; i < h * w; ++i) {
    const Rgb c = jet(heatmap.values[i]);
    rgb[i * 3] = to_byte(c.r);
    rgb[i * 3 + 1] = to_byte(c.g);
    rgb[i * 3 + 2] = to_byte(c.b);
  }
  write_png(rgb, h, w, path);
}

void export_heatmap_csv(const Heatmap& heatmap, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.precision(17);
  for (std::size_t y = 0; y < heatmap.height(); ++y) {
    for (std::size_t x = 0; x < heatmap.width(); ++x)
      os << (x ? "," : "") << heatmap.values.at(y, x);
    os << '\n';
  }
  if (!os) throw DataError("failed writing " + path.string());
}

double top_decile_mass(const Heatmap& heatmap) {
  std::vector<double> v = heatmap.values.values();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (total <= 0.0) return 0.0;
  const std::size_t top = std::max<std::size_t>(1, (v.size() + 9) / 10);
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(top), v.end(),
                    std::greater<>());
  return std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(top), 0.0) / total;
}

}  // namespace amc
