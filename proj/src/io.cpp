#include "korn/io.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace korn {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void put_u32(std::vector<unsigned char>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back((unsigned char)((v >> (8 * i)) & 0xff));
}
void put_f64(std::vector<unsigned char>& buf, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) buf.push_back((unsigned char)((bits >> (8 * i)) & 0xff));
}
uint32_t get_u32(const unsigned char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
  return v;
}
double get_f64(const unsigned char* p) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= uint64_t(p[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void write_field(const std::string& path, const DisplacementField& u) {
  std::vector<unsigned char> buf;
  buf.reserve(16 + u.jumps.segments.size() * 32 + u.u.size() * 16);
  buf.push_back('K');
  buf.push_back('D');
  buf.push_back('F');
  buf.push_back('1');
  put_u32(buf, uint32_t(u.grid.n));
  put_f64(buf, u.grid.mu);
  put_u32(buf, uint32_t(u.jumps.segments.size()));
  for (const auto& s : u.jumps.segments) {
    put_f64(buf, s.a.x);
    put_f64(buf, s.a.y);
    put_f64(buf, s.b.x);
    put_f64(buf, s.b.y);
  }
  for (const auto& v : u.u) {
    put_f64(buf, v.x);
    put_f64(buf, v.y);
  }
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw io_error("cannot open for writing: " + path);
  if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size())
    throw io_error("short write: " + path);
}

DisplacementField read_field(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw io_error("cannot open: " + path);
  std::fseek(f.get(), 0, SEEK_END);
  long size = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  if (size < 16) throw io_error("truncated field file: " + path);
  std::vector<unsigned char> buf(static_cast<size_t>(size), 0);
  if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size()) throw io_error("short read: " + path);
  if (std::memcmp(buf.data(), "KDF1", 4) != 0) throw io_error("bad magic (expected KDF1): " + path);
  size_t off = 4;
  uint32_t n = get_u32(buf.data() + off);
  off += 4;
  double mu = get_f64(buf.data() + off);
  off += 8;
  if (n < 1 || n > 1u << 16 || !(mu > 0) || !std::isfinite(mu)) throw io_error("bad header: " + path);
  uint32_t segs = get_u32(buf.data() + off);
  off += 4;
  size_t need = off + size_t(segs) * 32 + size_t(n) * n * 16;
  if (buf.size() < need) throw io_error("truncated field file: " + path);
  DisplacementField u{GridSpec(int(n), mu)};
  for (uint32_t s = 0; s < segs; ++s) {
    double ax = get_f64(buf.data() + off);
    double ay = get_f64(buf.data() + off + 8);
    double bx = get_f64(buf.data() + off + 16);
    double by = get_f64(buf.data() + off + 24);
    off += 32;
    Box dom{-mu, -mu, mu, mu};
    if (!dom.contains_closed({ax, ay}) || !dom.contains_closed({bx, by}))
      throw io_error("jump segment outside the domain square: " + path);
    u.jumps.add(Segment{{ax, ay}, {bx, by}});
  }
  for (size_t i = 0; i < size_t(n) * n; ++i) {
    double x = get_f64(buf.data() + off);
    double y = get_f64(buf.data() + off + 8);
    off += 16;
    if (!std::isfinite(x) || !std::isfinite(y)) throw io_error("non-finite displacement value: " + path);
    u.u[i] = {x, y};
  }
  return u;
}

}  // namespace korn
