#include "gae/params.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>

#include "gae/error.hpp"
#include "gae/tape.hpp"

namespace gae {

namespace {

constexpr char kMagic[] = "gae-params";
constexpr int kVersion = 1;

void write_f64_le(std::ostream& os, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  char buf[8];
  for (int i = 0; i < 8; ++i)
    buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

double read_f64_le(std::istream& is) {
  char buf[8];
  is.read(buf, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i]))
            << (8 * i);
  return std::bit_cast<double>(bits);
}

// Reads characters up to (not including) `delim`, consuming the delimiter.
std::string read_until(std::istream& is, char delim, const char* what) {
  std::string out;
  int ch;
  while ((ch = is.get()) != std::char_traits<char>::eof()) {
    if (ch == delim) return out;
    out.push_back(static_cast<char>(ch));
    if (out.size() > 1 << 20)
      throw IoError(std::string("checkpoint: runaway ") + what + " field");
  }
  throw IoError(std::string("checkpoint: truncated ") + what + " field");
}

long parse_long(const std::string& s, const char* what) {
  if (s.empty()) throw IoError(std::string("checkpoint: empty ") + what);
  size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw IoError(std::string("checkpoint: bad ") + what + " '" + s + "'");
  }
  if (pos != s.size())
    throw IoError(std::string("checkpoint: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace

Mat& ParamStore::add(const std::string& name, Mat value) {
  if (name.empty()) throw Error("ParamStore: empty parameter name");
  if (name.find('\t') != std::string::npos || name.find('\n') != std::string::npos)
    throw Error("ParamStore: parameter name contains tab/newline: " + name);
  auto [it, inserted] = by_name_.emplace(name, std::move(value));
  if (!inserted) throw Error("ParamStore: duplicate parameter '" + name + "'");
  order_.push_back(name);
  return it->second;
}

bool ParamStore::has(const std::string& name) const {
  return by_name_.count(name) != 0;
}

Mat& ParamStore::get(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("ParamStore: no parameter '" + name + "'");
  return it->second;
}

const Mat& ParamStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("ParamStore: no parameter '" + name + "'");
  return it->second;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& name : order_) n += by_name_.at(name).a.size();
  return n;
}

Tensor ParamStore::lease(Tape& tape, const std::string& name) const {
  return tape.param(name, get(name));
}

void ParamStore::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os << kMagic << '\t' << kVersion << '\t' << order_.size() << '\n';
  for (const std::string& name : order_) {
    const Mat& m = by_name_.at(name);
    os << name << '\t' << m.rows << 'x' << m.cols << '\t';
    for (double x : m.a) write_f64_le(os, x);
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  std::string magic = read_until(is, '\t', "magic");
  if (magic != kMagic)
    throw IoError("checkpoint: bad magic '" + magic + "' in " + path);
  long version = parse_long(read_until(is, '\t', "version"), "version");
  if (version != kVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  long count = parse_long(read_until(is, '\n', "tensor count"), "tensor count");
  if (count < 0) throw IoError("checkpoint: negative tensor count");

  ParamStore store;
  for (long k = 0; k < count; ++k) {
    std::string name = read_until(is, '\t', "tensor name");
    std::string shape = read_until(is, '\t', "tensor shape");
    size_t xpos = shape.find('x');
    if (xpos == std::string::npos)
      throw IoError("checkpoint: bad shape '" + shape + "' for " + name);
    long rows = parse_long(shape.substr(0, xpos), "rows");
    long cols = parse_long(shape.substr(xpos + 1), "cols");
    if (rows <= 0 || cols <= 0 || rows * cols > (1L << 28))
      throw IoError("checkpoint: implausible shape '" + shape + "' for " + name);
    Mat m(static_cast<int>(rows), static_cast<int>(cols));
    for (double& x : m.a) x = read_f64_le(is);
    if (!is) throw IoError("checkpoint: truncated data for " + name);
    if (is.get() != '\n')
      throw IoError("checkpoint: missing terminator after " + name);
    store.add(name, std::move(m));
  }
  return store;
}

}  // namespace gae
