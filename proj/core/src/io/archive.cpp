#include "booster/io/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "booster/errors.hpp"

namespace booster {
namespace {

constexpr char kArchiveMagic[8] = {'B', 'S', 'T', 'T', 'N', 'S', 'R', '\0'};
constexpr char kSignalMagic[8] = {'B', 'S', 'T', 'S', 'I', 'G', 'N', '\0'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    bytes(b, sizeof(T));
  }
  void str(const std::string& s) {
    le(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void floats(const Tensor& t) {
    for (float v : t.data()) le(v);
  }
  void finish(const std::filesystem::path& path) {
    le(fnv1a(buf_.data(), buf_.size()));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw DataError("short write to " + path.string());
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::filesystem::path& path, const char (&magic)[8]) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptionError("missing file " + path_);
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (buf_.size() < 8 + 8 || std::memcmp(buf_.data(), magic, 8) != 0) throw FormatError(path_ + ": bad magic");
    pos_ = 8;
    end_ = buf_.size() - 8;
  }
  void verify_hash() const {
    std::uint64_t stored = 0;
    std::memcpy(&stored, buf_.data() + end_, 8);
    if constexpr (std::endian::native == std::endian::big) stored = byteswap(stored);
    if (stored != fnv1a(buf_.data(), end_)) throw CorruptionError(path_ + ": checksum mismatch");
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, buf_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = le<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Tensor floats(Shape shape) {
    const std::size_t n = shape.numel();
    need(n * 4);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < n; ++i) t[i] = le<float>();
    return t;
  }
  void expect_end() const {
    if (pos_ != end_) throw FormatError(path_ + ": trailing bytes");
  }
  const std::string& path() const { return path_; }

 private:
  static std::uint64_t byteswap(std::uint64_t v) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
    return r;
  }
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw FormatError(path_ + ": truncated payload");
  }

  std::string path_;
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

std::string shape_to_text(const Shape& s) {
  std::ostringstream os;
  for (std::size_t i = 0; i < s.rank(); ++i) os << (i ? "x" : "") << s[i];
  return os.str();
}

Shape shape_from_text(const std::string& text) {
  std::vector<std::size_t> dims;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, 'x')) dims.push_back(std::stoul(part));
  return Shape(std::move(dims));
}

}  // namespace

const Tensor* TensorArchive::find(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  Writer w;
  w.bytes(kArchiveMagic, 8);
  w.le(kArchiveVersion);
  w.le(static_cast<std::uint32_t>(archive.meta.size()));
  for (const auto& [k, v] : archive.meta) {
    w.str(k);
    w.str(v);
  }
  w.le(static_cast<std::uint32_t>(archive.tensors.size()));
  for (const NamedTensor& t : archive.tensors) {
    w.str(t.name);
    w.le(static_cast<std::uint32_t>(t.value.shape().rank()));
    for (std::size_t d : t.value.shape().dims()) w.le(static_cast<std::uint64_t>(d));
    w.floats(t.value);
  }
  w.finish(path);
}

TensorArchive load_archive(const std::filesystem::path& path) {
  Reader r(path, kArchiveMagic);
  const auto version = r.le<std::uint32_t>();
  if (version != kArchiveVersion) {
    throw FormatError(r.path() + ": unsupported archive version " + std::to_string(version));
  }
  r.verify_hash();
  TensorArchive a;
  const auto n_meta = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    a.meta[k] = r.str();
  }
  const auto n = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const auto rank = r.le<std::uint32_t>();
    if (rank > 8) throw FormatError(r.path() + ": implausible tensor rank");
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = static_cast<std::size_t>(r.le<std::uint64_t>());
    a.tensors.push_back({std::move(name), r.floats(Shape(std::move(dims)))});
  }
  r.expect_end();
  return a;
}

void save_signal(const std::filesystem::path& path, const BoosterSignal& signal) {
  Writer w;
  w.bytes(kSignalMagic, 8);
  w.le(kSignalVersion);
  w.le(static_cast<std::uint32_t>(signal.width()));
  w.le(static_cast<std::uint32_t>(signal.channels()));
  w.le(static_cast<std::uint32_t>(signal.image_height()));
  w.le(static_cast<std::uint32_t>(signal.image_width()));
  w.floats(signal.frame());
  w.finish(path);
}

BoosterSignal load_signal(const std::filesystem::path& path) {
  Reader r(path, kSignalMagic);
  const auto version = r.le<std::uint32_t>();
  if (version != kSignalVersion) throw FormatError(r.path() + ": unsupported signal version " + std::to_string(version));
  r.verify_hash();
  const auto w = r.le<std::uint32_t>();
  const auto c = r.le<std::uint32_t>();
  const auto h = r.le<std::uint32_t>();
  const auto iw = r.le<std::uint32_t>();
  BoosterSignal s(w, c, h, iw);
  Tensor frame = r.floats(s.canvas_shape());
  r.expect_end();
  s.set_frame(std::move(frame));
  return s;
}

TensorArchive model_archive(const Model& model) {
  TensorArchive a;
  a.meta["arch"] = model.arch();
  a.meta["num_classes"] = std::to_string(model.num_classes());
  a.meta["input_shape"] = shape_to_text(model.input_shape());
  a.tensors = model.params();
  return a;
}

Model model_from_archive(const TensorArchive& archive) {
  const auto get = [&](const std::string& key) {
    auto it = archive.meta.find(key);
    if (it == archive.meta.end()) throw FormatError("model archive lacks '" + key + "'");
    return it->second;
  };
  Model m = build_cnn(get("arch"), std::stoul(get("num_classes")), shape_from_text(get("input_shape")));
  for (NamedTensor& p : m.params()) {
    const Tensor* t = archive.find(p.name);
    if (t == nullptr) throw CorruptionError("model archive lacks parameter " + p.name);
    if (t->shape() != p.value.shape()) throw CorruptionError("parameter " + p.name + " has shape " + t->shape().str());
    p.value = *t;
  }
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model) { save_archive(path, model_archive(model)); }

Model load_model(const std::filesystem::path& path) { return model_from_archive(load_archive(path)); }

}  // namespace booster
