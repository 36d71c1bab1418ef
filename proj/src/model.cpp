#include "acsc/model.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "acsc/rng.hpp"
#include "acsc/solvers.hpp"

namespace acsc {

void ModelParams::validate() const {
  const int s = d.size;
  const int m = d.in_channels;
  const int c = d.out_channels;
  if (w_e.size != s || w_d.size != s)
    throw ShapeError("ModelParams: filter sizes disagree");
  if (w_e.in_channels != c || w_e.out_channels != m)
    throw ShapeError("ModelParams: w_e must be s x s x c x m");
  if (w_d.in_channels != m || w_d.out_channels != c)
    throw ShapeError("ModelParams: w_d must be s x s x m x c");
  if (static_cast<int>(theta.size()) != m)
    throw ShapeError("ModelParams: one threshold per map required");
  for (double t : theta)
    if (!(t >= 0.0)) throw ValueError("ModelParams: thresholds must be nonnegative");
  if (K < 1) throw ValueError("ModelParams: K must be >= 1");
}

ModelParams init_params(std::uint64_t seed, int s, int m, int c, int K) {
  if (s % 2 == 0) throw ValueError("init_params: filter size must be odd");
  if (m < 1 || c < 1 || K < 1) throw ValueError("init_params: bad dimensions");

  ModelParams p;
  p.K = K;
  p.w_d = FilterBank(s, m, c);
  Rng rng(seed);
  // The scale must leave a visible fraction of first-iteration activations
  // beyond theta = 0.1, otherwise the dead zone blocks every gradient path
  // and training cannot leave the initial point.
  const double stddev = 1.0 / s;
  for (double& v : p.w_d.data) v = rng.normal(0.0, stddev);
  p.d = p.w_d;  // decoder starts from the same draw
  p.w_e = transpose_bank(flip_filters(p.w_d));
  for (double& v : p.w_e.data) v *= 0.1;  // stands in for the 1/L step factor
  p.theta.assign(m, 0.1);
  p.validate();
  return p;
}

FeatureMaps encode(const Image& x, const ModelParams& p, const Image* mask,
                   PaddingMode mode, EncodeTrace* trace, int threads) {
  p.validate();
  if (x.channels != p.channels()) throw ShapeError("encode: image channels do not match model");
  if (mask) {
    if (!mask->same_shape(x)) throw ShapeError("encode: mask dims do not match image");
    for (double v : mask->data)
      if (v != 0.0 && v != 1.0) throw ValueError("encode: mask entries must be exactly 0 or 1");
  }
  if (trace) trace->steps.clear();

  const int H = x.height, W = x.width;
  FeatureMaps z(H, W, p.maps());
  Image resid(H, W, x.channels);
  FeatureMaps update(H, W, p.maps());

  for (int k = 0; k < p.K; ++k) {
    bank_apply(view(z), p.w_d, /*flip=*/true, mode, mut_view(resid), threads);
    for (std::size_t i = 0; i < resid.data.size(); ++i)
      resid.data[i] = x.data[i] - resid.data[i];
    if (mask)
      for (std::size_t i = 0; i < resid.data.size(); ++i) resid.data[i] *= mask->data[i];

    bank_apply(view(resid), p.w_e, /*flip=*/true, mode, mut_view(update), threads);
    for (std::size_t i = 0; i < update.data.size(); ++i) update.data[i] += z.data[i];

    if (trace) trace->steps.push_back({z, resid, update});
    z = update;
    soft_threshold_inplace(z, p.theta);
  }
  return z;
}

Image decode(const FeatureMaps& z, const ModelParams& p, PaddingMode mode, int threads) {
  if (z.maps != p.maps()) throw ShapeError("decode: map count does not match model");
  return synthesis_transform(z, p.d, mode, threads);
}

ForwardResult forward(const Image& x, const ModelParams& p, const Image* mask,
                      PaddingMode mode, int threads) {
  ForwardResult out;
  out.code = encode(x, p, mask, mode, nullptr, threads);
  out.reconstruction = decode(out.code, p, mode, threads);
  std::size_t zeros = 0;
  for (double v : out.code.data)
    if (v == 0.0) ++zeros;
  out.sparsity = static_cast<double>(zeros) / static_cast<double>(out.code.data.size());
  return out;
}

// --- persistence ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'A', 'C', 'S', 'C'};
constexpr unsigned char kVersion = 0x01;

// CRC-32 (IEEE), reflected polynomial 0xEDB88320.
std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f64_block(std::string& out, const std::vector<double>& v) {
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void get_f64_block(const unsigned char* p, std::vector<double>& v) {
  for (double& x : v) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    std::memcpy(&x, &bits, sizeof x);
    p += 8;
  }
}

}  // namespace

void save_model(const ModelParams& p, const std::string& path) {
  p.validate();
  std::string payload;
  payload.reserve((p.w_e.data.size() + p.w_d.data.size() + p.theta.size() +
                   p.d.data.size()) * 8);
  put_f64_block(payload, p.w_e.data);
  put_f64_block(payload, p.w_d.data);
  put_f64_block(payload, p.theta);
  put_f64_block(payload, p.d.data);

  std::string out;
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(p.size()));
  put_u32(out, static_cast<std::uint32_t>(p.maps()));
  put_u32(out, static_cast<std::uint32_t>(p.channels()));
  put_u32(out, static_cast<std::uint32_t>(p.K));
  out += payload;
  put_u32(out, crc32(reinterpret_cast<const unsigned char*>(payload.data()), payload.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_model: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("save_model: write failed for " + path);
}

ModelParams load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_model: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < 21) throw FormatError("load_model: file too short for a header");
  if (std::memcmp(p, kMagic, 4) != 0) throw FormatError("load_model: bad magic");
  if (p[4] != kVersion) throw FormatError("load_model: unsupported version");

  const std::uint32_t s = get_u32(p + 5);
  const std::uint32_t m = get_u32(p + 9);
  const std::uint32_t c = get_u32(p + 13);
  const std::uint32_t K = get_u32(p + 17);
  if (s == 0 || s % 2 == 0 || m == 0 || c == 0 || K == 0)
    throw FormatError("load_model: invalid header dimensions");

  const std::size_t n_bank = static_cast<std::size_t>(s) * s * m * c;
  const std::size_t payload_len = (n_bank * 3 + m) * 8;
  if (bytes.size() != 21 + payload_len + 4)
    throw CorruptionError("load_model: payload truncated or oversized");

  const unsigned char* payload = p + 21;
  const std::uint32_t want_crc = get_u32(payload + payload_len);
  if (crc32(payload, payload_len) != want_crc)
    throw CorruptionError("load_model: payload CRC mismatch");

  ModelParams out;
  out.K = static_cast<int>(K);
  out.w_e = FilterBank(static_cast<int>(s), static_cast<int>(c), static_cast<int>(m));
  out.w_d = FilterBank(static_cast<int>(s), static_cast<int>(m), static_cast<int>(c));
  out.theta.assign(m, 0.0);
  out.d = FilterBank(static_cast<int>(s), static_cast<int>(m), static_cast<int>(c));

  const unsigned char* cursor = payload;
  get_f64_block(cursor, out.w_e.data);
  cursor += out.w_e.data.size() * 8;
  get_f64_block(cursor, out.w_d.data);
  cursor += out.w_d.data.size() * 8;
  get_f64_block(cursor, out.theta);
  cursor += out.theta.size() * 8;
  get_f64_block(cursor, out.d.data);

  if (!all_finite(out.w_e.data) || !all_finite(out.w_d.data) || !all_finite(out.theta) ||
      !all_finite(out.d.data))
    throw ValueError("load_model: non-finite parameter values");
  out.validate();  // rejects negative thresholds and inconsistent shapes
  return out;
}

}  // namespace acsc
