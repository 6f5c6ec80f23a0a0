#pragma once
// Datasets for the training harness: a synthetic two-class stripe task that
// trains in seconds, plus a loader for the classic big-endian image/label
// file pair and a stratified splitter.
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "prng.hpp"
#include "tensor.hpp"

namespace compconv {

struct Dataset {
  Tensor images;              // (n, c, h, w)
  std::vector<long> labels;   // one integer class per sample

  long size() const { return images.shape.n; }
};

// Two-class orientation task: class 0 draws horizontal stripes, class 1
// vertical ones, both with a random phase and additive Gaussian noise.
// Labels alternate so every prefix is nearly balanced.
inline Dataset synth_stripes(long n = 256, long size = 8, double noise_std = 0.1,
                             std::uint64_t seed = 0) {
  if (n <= 0 || size <= 0) throw std::invalid_argument("synth_stripes: n and size must be positive");
  Dataset ds;
  ds.images = Tensor(n, 1, size, size);
  ds.labels.resize(std::size_t(n));
  SplitMix64 rng = derive_stream(seed, Stream::data_noise);
  for (long i = 0; i < n; ++i) {
    long label = i % 2;
    ds.labels[std::size_t(i)] = label;
    long phase = long(rng.next_below(2));
    for (long y = 0; y < size; ++y)
      for (long x = 0; x < size; ++x) {
        long coord = label == 0 ? y : x;
        double value = ((coord + phase) % 2 == 0) ? 1.0 : -1.0;
        ds.images.at(i, 0, y, x) = value + noise_std * rng.next_normal();
      }
  }
  return ds;
}

namespace detail {

inline std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw io_error("idx: truncated " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace detail

// Loads an image/label file pair in the big-endian idx format (magic
// 0x00000803 for u8 image tensors, 0x00000801 for u8 label vectors).
// Pixels are scaled to [0, 1].  limit > 0 keeps only the first samples.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        long limit = 0) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw io_error("idx: cannot open " + images_path);
  if (detail::read_be_u32(imgs, "image magic") != 0x00000803u)
    throw io_error("idx: bad image magic in " + images_path);
  long n = long(detail::read_be_u32(imgs, "image count"));
  long rows = long(detail::read_be_u32(imgs, "row count"));
  long cols = long(detail::read_be_u32(imgs, "column count"));
  if (n <= 0 || rows <= 0 || cols <= 0) throw io_error("idx: empty image file " + images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw io_error("idx: cannot open " + labels_path);
  if (detail::read_be_u32(labs, "label magic") != 0x00000801u)
    throw io_error("idx: bad label magic in " + labels_path);
  long n_labels = long(detail::read_be_u32(labs, "label count"));
  if (n_labels != n) throw io_error("idx: image/label count mismatch");

  long keep = (limit > 0 && limit < n) ? limit : n;
  Dataset ds;
  ds.images = Tensor(keep, 1, rows, cols);
  ds.labels.resize(std::size_t(keep));

  std::vector<unsigned char> row(std::size_t(rows * cols));
  for (long i = 0; i < keep; ++i) {
    imgs.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
    if (!imgs) throw io_error("idx: truncated image data in " + images_path);
    for (long p = 0; p < rows * cols; ++p)
      ds.images.data[std::size_t(i * rows * cols + p)] = double(row[std::size_t(p)]) / 255.0;
  }
  std::vector<unsigned char> lab(static_cast<std::size_t>(keep), 0);
  labs.read(reinterpret_cast<char*>(lab.data()), std::streamsize(lab.size()));
  if (!labs) throw io_error("idx: truncated label data in " + labels_path);
  for (long i = 0; i < keep; ++i) ds.labels[std::size_t(i)] = long(lab[std::size_t(i)]);
  return ds;
}

// Stratified split: each class is shuffled independently and divided so
// both parts keep the class balance.  `fraction` is the share of the first
// part.  Original sample order is preserved within each part.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("split: fraction must lie in [0, 1]");
  long n = ds.size();
  long max_label = -1;
  for (long l : ds.labels) max_label = std::max(max_label, l);

  std::vector<char> in_first(std::size_t(n), 0);
  for (long cls = 0; cls <= max_label; ++cls) {
    std::vector<std::size_t> members;
    for (long i = 0; i < n; ++i)
      if (ds.labels[std::size_t(i)] == cls) members.push_back(std::size_t(i));
    if (members.empty()) continue;
    SplitMix64 rng = derive_substream(seed, Stream::split, std::uint64_t(cls));
    fisher_yates(members, rng);
    std::size_t take = std::size_t(double(members.size()) * fraction + 0.5);
    for (std::size_t j = 0; j < take; ++j) in_first[members[j]] = 1;
  }

  auto gather = [&](bool first) {
    std::vector<long> keep;
    for (long i = 0; i < n; ++i)
      if ((in_first[std::size_t(i)] != 0) == first) keep.push_back(i);
    Dataset part;
    part.images = Tensor(long(keep.size()), ds.images.shape.c, ds.images.shape.h, ds.images.shape.w);
    part.labels.resize(keep.size());
    long plane = ds.images.shape.c * ds.images.shape.h * ds.images.shape.w;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      std::copy(ds.images.data.begin() + keep[j] * plane,
                ds.images.data.begin() + (keep[j] + 1) * plane,
                part.images.data.begin() + long(j) * plane);
      part.labels[j] = ds.labels[std::size_t(keep[j])];
    }
    return part;
  };
  return {gather(true), gather(false)};
}

// Selects a contiguous batch of sample indices into a fresh tensor pair.
inline std::pair<Tensor, std::vector<long>> take_batch(const Dataset& ds,
                                                       const std::vector<std::size_t>& order,
                                                       std::size_t begin, std::size_t count) {
  long plane = ds.images.shape.c * ds.images.shape.h * ds.images.shape.w;
  Tensor batch(long(count), ds.images.shape.c, ds.images.shape.h, ds.images.shape.w);
  std::vector<long> labels(count);
  for (std::size_t j = 0; j < count; ++j) {
    long src = long(order[begin + j]);
    std::copy(ds.images.data.begin() + src * plane, ds.images.data.begin() + (src + 1) * plane,
              batch.data.begin() + long(j) * plane);
    labels[j] = ds.labels[std::size_t(src)];
  }
  return {std::move(batch), std::move(labels)};
}

}  // namespace compconv
