#pragma once
// Dense NCHW tensor plus the reference executor ops: grouped conv2d,
// channel concat/slice/shuffle, spatial subsampling, relu, pooling, dense.
// Everything is correctness-first naive loops; the MacCounter instruments
// multiply-accumulates so analytical cost formulas can be checked against
// what the executor actually does.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace compconv {

// File access or file format failure (CLI maps this to exit code 4).
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checked mode validates values at construction (NaN/Inf rejected).
// Tests run checked; training loops may switch it off for speed.
inline bool& checked_mode() {
  static bool on = true;
  return on;
}

struct ScopedFastMode {
  bool previous;
  ScopedFastMode() : previous(checked_mode()) { checked_mode() = false; }
  ~ScopedFastMode() { checked_mode() = previous; }
};

struct Shape4 {
  long n = 0, c = 0, h = 0, w = 0;
  long count() const { return n * c * h * w; }
  bool operator==(const Shape4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape4& o) const { return !(*this == o); }
};

inline std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," +
         std::to_string(s.h) + "," + std::to_string(s.w) + ")";
}

class Tensor {
public:
  Shape4 shape;
  std::vector<double> data;

  Tensor() = default;

  Tensor(long n, long c, long h, long w, double fill = 0.0)
      : shape{n, c, h, w} {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw std::invalid_argument("Tensor: negative dimension " + to_string(shape));
    data.assign(std::size_t(shape.count()), fill);
  }

  Tensor(Shape4 s, std::vector<double> values) : shape(s), data(std::move(values)) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
      throw std::invalid_argument("Tensor: negative dimension " + to_string(s));
    if (long(data.size()) != s.count())
      throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                  " does not match shape " + to_string(s));
    if (checked_mode()) {
      for (double v : data)
        if (!std::isfinite(v))
          throw std::invalid_argument("Tensor: non-finite value rejected in checked mode");
    }
  }

  static Tensor zeros(long n, long c, long h, long w) { return Tensor(n, c, h, w, 0.0); }
  static Tensor full(long n, long c, long h, long w, double v) { return Tensor(n, c, h, w, v); }

  long count() const { return shape.count(); }

  std::size_t index(long n, long c, long h, long w) const {
    return std::size_t(((n * shape.c + c) * shape.h + h) * shape.w + w);
  }
  double& at(long n, long c, long h, long w) { return data[index(n, c, h, w)]; }
  double at(long n, long c, long h, long w) const { return data[index(n, c, h, w)]; }
};

inline bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape && a.data == b.data;
}

// Convolution hyperparameters.  Cross-correlation semantics, no kernel flip;
// bias off by default (cost tables in this project are bias-free for convs).
struct ConvSpec {
  long k = 3;
  long stride = 1;
  long padding = 1;
  long groups = 1;
  long c_in = 1;
  long c_out = 1;
  bool bias = false;
};

inline void validate_spec(const ConvSpec& s) {
  if (s.k < 1 || s.stride < 1 || s.padding < 0 || s.groups < 1 || s.c_in < 1 || s.c_out < 1)
    throw std::invalid_argument("ConvSpec: non-positive field");
  if (s.c_in % s.groups != 0 || s.c_out % s.groups != 0)
    throw std::invalid_argument("ConvSpec: groups=" + std::to_string(s.groups) +
                                " must divide c_in=" + std::to_string(s.c_in) +
                                " and c_out=" + std::to_string(s.c_out));
}

// Output spatial dims, throwing if the window never fits.
inline std::pair<long, long> conv_out_dims(const ConvSpec& s, long h, long w) {
  long oh = (h + 2 * s.padding - s.k) / s.stride + 1;
  long ow = (w + 2 * s.padding - s.k) / s.stride + 1;
  if (h + 2 * s.padding < s.k || w + 2 * s.padding < s.k || oh < 1 || ow < 1)
    throw std::invalid_argument("conv2d: empty output window for input " + std::to_string(h) +
                                "x" + std::to_string(w));
  return {oh, ow};
}

struct MacCounter {
  unsigned long long macs = 0;
  void add(unsigned long long m) { macs += m; }
};

// Grouped 2-D cross-correlation.  weights shape: (c_out, c_in/groups, k, k).
inline Tensor conv2d(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                     MacCounter* counter = nullptr) {
  validate_spec(spec);
  if (input.shape.c != spec.c_in)
    throw std::invalid_argument("conv2d: input has " + std::to_string(input.shape.c) +
                                " channels, spec.c_in=" + std::to_string(spec.c_in));
  long cpg = spec.c_in / spec.groups;   // channels per group (input side)
  long opg = spec.c_out / spec.groups;  // filters per group
  Shape4 wanted{spec.c_out, cpg, spec.k, spec.k};
  if (weights.shape != wanted)
    throw std::invalid_argument("conv2d: weight shape " + to_string(weights.shape) +
                                ", expected " + to_string(wanted));
  auto [oh, ow] = conv_out_dims(spec, input.shape.h, input.shape.w);
  long n = input.shape.n, h = input.shape.h, w = input.shape.w, k = spec.k;

  Tensor out(n, spec.c_out, oh, ow);
  for (long b = 0; b < n; ++b)
    for (long g = 0; g < spec.groups; ++g)
      for (long of = 0; of < opg; ++of) {
        long oc = g * opg + of;
        for (long y = 0; y < oh; ++y)
          for (long x = 0; x < ow; ++x) {
            double acc = 0.0;
            long base_h = y * spec.stride - spec.padding;
            long base_w = x * spec.stride - spec.padding;
            for (long ic = 0; ic < cpg; ++ic) {
              long in_c = g * cpg + ic;
              for (long kh = 0; kh < k; ++kh) {
                long ih = base_h + kh;
                if (ih < 0 || ih >= h) continue;
                for (long kw = 0; kw < k; ++kw) {
                  long iw = base_w + kw;
                  if (iw < 0 || iw >= w) continue;
                  acc += input.at(b, in_c, ih, iw) * weights.at(oc, ic, kh, kw);
                }
              }
            }
            out.at(b, oc, y, x) = acc;
          }
      }
  if (counter)
    counter->add((unsigned long long)(n) * oh * ow * k * k * cpg * spec.c_out);
  return out;
}

inline Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: empty list");
  long n = parts[0].shape.n, h = parts[0].shape.h, w = parts[0].shape.w;
  long c_total = 0;
  for (const Tensor& p : parts) {
    if (p.shape.n != n || p.shape.h != h || p.shape.w != w)
      throw std::invalid_argument("concat_channels: mismatched batch/spatial dims");
    c_total += p.shape.c;
  }
  Tensor out(n, c_total, h, w);
  for (long b = 0; b < n; ++b) {
    long c_off = 0;
    for (const Tensor& p : parts) {
      for (long c = 0; c < p.shape.c; ++c)
        std::memcpy(&out.data[out.index(b, c_off + c, 0, 0)],
                    &p.data[p.index(b, c, 0, 0)], std::size_t(h * w) * sizeof(double));
      c_off += p.shape.c;
    }
  }
  return out;
}

// Channels [start, start+len); with wrap=true indices are taken modulo c
// (cyclic tiling), which is how identity copies borrow from narrow inputs.
inline Tensor slice_channels(const Tensor& t, long start, long len, bool wrap) {
  if (len < 1) throw std::invalid_argument("slice_channels: len must be >= 1");
  if (start < 0) throw std::invalid_argument("slice_channels: negative start");
  if (!wrap && start + len > t.shape.c)
    throw std::out_of_range("slice_channels: [" + std::to_string(start) + "," +
                            std::to_string(start + len) + ") exceeds c=" +
                            std::to_string(t.shape.c) + " without wrap");
  long n = t.shape.n, h = t.shape.h, w = t.shape.w;
  Tensor out(n, len, h, w);
  for (long b = 0; b < n; ++b)
    for (long c = 0; c < len; ++c) {
      long src = wrap ? (start + c) % t.shape.c : start + c;
      std::memcpy(&out.data[out.index(b, c, 0, 0)], &t.data[t.index(b, src, 0, 0)],
                  std::size_t(h * w) * sizeof(double));
    }
  return out;
}

// channel i -> position (i mod g)*(c/g) + i/g, the reshape-(c/g,g)-transpose
// permutation that mixes block origins after concatenation
inline Tensor channel_shuffle(const Tensor& t, long g) {
  if (g < 1 || t.shape.c % g != 0)
    throw std::invalid_argument("channel_shuffle: groups " + std::to_string(g) +
                                " do not divide c=" + std::to_string(t.shape.c));
  long n = t.shape.n, c = t.shape.c, h = t.shape.h, w = t.shape.w;
  Tensor out(n, c, h, w);
  for (long b = 0; b < n; ++b)
    for (long i = 0; i < c; ++i) {
      long dst = (i % g) * (c / g) + i / g;
      std::memcpy(&out.data[out.index(b, dst, 0, 0)], &t.data[t.index(b, i, 0, 0)],
                  std::size_t(h * w) * sizeof(double));
    }
  return out;
}

inline long shuffle_destination(long i, long c, long g) { return (i % g) * (c / g) + i / g; }

// Keeps pixels at (s*i, s*j).  Top-left alignment matches the first sampled
// center of a same-padded conv, so the identity branch of a strided layer
// lands on the same grid as the conv branch.
inline Tensor spatial_subsample(const Tensor& t, long s) {
  if (s < 1) throw std::invalid_argument("spatial_subsample: stride must be >= 1");
  if (s == 1) return t;
  long oh = (t.shape.h + s - 1) / s, ow = (t.shape.w + s - 1) / s;
  if (oh < 1 || ow < 1) throw std::invalid_argument("spatial_subsample: empty output");
  Tensor out(t.shape.n, t.shape.c, oh, ow);
  for (long b = 0; b < t.shape.n; ++b)
    for (long c = 0; c < t.shape.c; ++c)
      for (long y = 0; y < oh; ++y)
        for (long x = 0; x < ow; ++x)
          out.at(b, c, y, x) = t.at(b, c, y * s, x * s);
  return out;
}

inline Tensor relu(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

inline Tensor maxpool2x2(const Tensor& t) {
  if (t.shape.h % 2 != 0 || t.shape.w % 2 != 0)
    throw std::invalid_argument("maxpool2x2: odd spatial dims " + to_string(t.shape));
  long n = t.shape.n, c = t.shape.c, oh = t.shape.h / 2, ow = t.shape.w / 2;
  Tensor out(n, c, oh, ow);
  for (long b = 0; b < n; ++b)
    for (long ch = 0; ch < c; ++ch)
      for (long y = 0; y < oh; ++y)
        for (long x = 0; x < ow; ++x) {
          double m = t.at(b, ch, 2 * y, 2 * x);
          m = std::max(m, t.at(b, ch, 2 * y, 2 * x + 1));
          m = std::max(m, t.at(b, ch, 2 * y + 1, 2 * x));
          m = std::max(m, t.at(b, ch, 2 * y + 1, 2 * x + 1));
          out.at(b, ch, y, x) = m;
        }
  return out;
}

inline Tensor global_avg_pool(const Tensor& t) {
  long n = t.shape.n, c = t.shape.c, hw = t.shape.h * t.shape.w;
  if (hw == 0) throw std::invalid_argument("global_avg_pool: empty spatial dims");
  Tensor out(n, c, 1, 1);
  for (long b = 0; b < n; ++b)
    for (long ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (long y = 0; y < t.shape.h; ++y)
        for (long x = 0; x < t.shape.w; ++x) acc += t.at(b, ch, y, x);
      out.at(b, ch, 0, 0) = acc / double(hw);
    }
  return out;
}

// x: (n, c, 1, 1); weights: (classes, c, 1, 1); bias: (1, classes, 1, 1)
inline Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  if (x.shape.h != 1 || x.shape.w != 1)
    throw std::invalid_argument("dense: expects pooled (n,c,1,1) input");
  long classes = weights.shape.n, c = weights.shape.c;
  if (x.shape.c != c || bias.shape.c != classes)
    throw std::invalid_argument("dense: weight/bias shape mismatch");
  Tensor out(x.shape.n, classes, 1, 1);
  for (long b = 0; b < x.shape.n; ++b)
    for (long o = 0; o < classes; ++o) {
      double acc = bias.at(0, o, 0, 0);
      for (long i = 0; i < c; ++i) acc += x.at(b, i, 0, 0) * weights.at(o, i, 0, 0);
      out.at(b, o, 0, 0) = acc;
    }
  return out;
}

// ---- binary serialization ("CCT1") ---------------------------------------
// little-endian: magic "CCT1", 4 x u32 shape (n,c,h,w), u8 dtype tag
// (0 = float32, 1 = float64), then the raw values

namespace detail {
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(std::uint8_t(v));
  out.push_back(std::uint8_t(v >> 8));
  out.push_back(std::uint8_t(v >> 16));
  out.push_back(std::uint8_t(v >> 24));
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  put_u32(out, std::uint32_t(v));
  put_u32(out, std::uint32_t(v >> 32));
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
  return std::uint64_t(get_u32(p)) | (std::uint64_t(get_u32(p + 4)) << 32);
}
}  // namespace detail

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

inline void serialize_tensor(const Tensor& t, std::vector<std::uint8_t>& out,
                             Dtype dtype = Dtype::f64) {
  out.push_back('C'); out.push_back('C'); out.push_back('T'); out.push_back('1');
  detail::put_u32(out, std::uint32_t(t.shape.n));
  detail::put_u32(out, std::uint32_t(t.shape.c));
  detail::put_u32(out, std::uint32_t(t.shape.h));
  detail::put_u32(out, std::uint32_t(t.shape.w));
  out.push_back(std::uint8_t(dtype));
  for (double v : t.data) {
    if (dtype == Dtype::f64) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      detail::put_u64(out, bits);
    } else {
      float f = float(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      detail::put_u32(out, bits);
    }
  }
}

// Reads one tensor starting at offset; advances offset past it.
inline Tensor deserialize_tensor(const std::vector<std::uint8_t>& in, std::size_t& offset) {
  if (in.size() < offset + 21) throw io_error("tensor blob: truncated header");
  const std::uint8_t* p = in.data() + offset;
  if (std::memcmp(p, "CCT1", 4) != 0) throw io_error("tensor blob: bad magic");
  Shape4 s{long(detail::get_u32(p + 4)), long(detail::get_u32(p + 8)),
           long(detail::get_u32(p + 12)), long(detail::get_u32(p + 16))};
  Dtype dtype = Dtype(p[20]);
  if (dtype != Dtype::f32 && dtype != Dtype::f64)
    throw io_error("tensor blob: unknown dtype tag");
  std::size_t elem = dtype == Dtype::f64 ? 8 : 4;
  std::size_t need = std::size_t(s.count()) * elem;
  if (in.size() < offset + 21 + need) throw io_error("tensor blob: truncated data");
  std::vector<double> values(std::size_t(s.count()));
  const std::uint8_t* q = p + 21;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (dtype == Dtype::f64) {
      std::uint64_t bits = detail::get_u64(q + i * 8);
      std::memcpy(&values[i], &bits, 8);
    } else {
      std::uint32_t bits = detail::get_u32(q + i * 4);
      float f;
      std::memcpy(&f, &bits, 4);
      values[i] = double(f);
    }
  }
  offset += 21 + need;
  return Tensor(s, std::move(values));
}

inline void save_tensor(const Tensor& t, const std::string& path, Dtype dtype = Dtype::f64) {
  std::vector<std::uint8_t> bytes;
  serialize_tensor(t, bytes, dtype);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("save_tensor: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), long(bytes.size()));
  if (!f) throw io_error("save_tensor: write failed for " + path);
}

inline Tensor load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("load_tensor: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  std::size_t offset = 0;
  return deserialize_tensor(bytes, offset);
}

}  // namespace compconv
