#include "crdnd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace crdnd {

namespace {

constexpr char kMagic[4] = {'C', 'R', 'D', 'C'};

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <class T>
  void pod(T v) {
    raw(&v, sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    raw(s.data(), s.size());
  }
  template <class T>
  void vec(const std::vector<T>& v) {
    pod<std::uint64_t>(v.size());
    raw(v.data(), v.size() * sizeof(T));
  }
  const std::vector<unsigned char>& bytes() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}

  void raw(void* out, std::size_t n, const char* what) {
    if (off_ + n > n_)
      throw CheckpointError(std::string("truncated while reading ") + what, off_);
    std::memcpy(out, p_ + off_, n);
    off_ += n;
  }
  template <class T>
  T pod(const char* what) {
    T v;
    raw(&v, sizeof(T), what);
    return v;
  }
  std::string str(const char* what) {
    const auto n = pod<std::uint64_t>(what);
    if (off_ + n > n_) throw CheckpointError(std::string("truncated string ") + what, off_);
    std::string s(reinterpret_cast<const char*>(p_ + off_), n);
    off_ += n;
    return s;
  }
  template <class T>
  std::vector<T> vec(const char* what) {
    const auto n = pod<std::uint64_t>(what);
    if (n > (n_ - off_) / sizeof(T))
      throw CheckpointError(std::string("truncated array ") + what, off_);
    std::vector<T> v(n);
    raw(v.data(), n * sizeof(T), what);
    return v;
  }
  std::size_t offset() const { return off_; }
  bool done() const { return off_ == n_; }

 private:
  const unsigned char* p_;
  std::size_t n_, off_ = 0;
};

void write_named_tensors(ByteWriter& w, const std::vector<NamedTensorF>& ts) {
  w.pod<std::uint64_t>(ts.size());
  for (const auto& t : ts) {
    w.str(t.name);
    w.pod<std::uint64_t>(t.shape.size());
    for (auto d : t.shape) w.pod<std::uint64_t>(d);
    w.vec(t.data);
  }
}

std::vector<NamedTensorF> read_named_tensors(ByteReader& r, const char* what) {
  const auto count = r.pod<std::uint64_t>(what);
  std::vector<NamedTensorF> ts;
  ts.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensorF t;
    t.name = r.str(what);
    const auto rank = r.pod<std::uint64_t>(what);
    std::size_t numel = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.pod<std::uint64_t>(what));
      numel *= t.shape.back();
    }
    t.data = r.vec<float>(what);
    if (t.data.size() != numel)
      throw CheckpointError("tensor '" + t.name + "' data does not match its shape",
                            r.offset());
    ts.push_back(std::move(t));
  }
  return ts;
}

void write_noise(ByteWriter& w, const NoiseMatrix& m) {
  w.pod<std::uint64_t>(m.dim());
  w.pod<std::uint8_t>(m.scenario() == Scenario::adversarial ? 1 : 0);
  if (m.dim()) w.vec(m.flat());
}

NoiseMatrix read_noise(ByteReader& r) {
  const auto k = r.pod<std::uint64_t>("noise matrix dim");
  const auto sc = r.pod<std::uint8_t>("noise matrix scenario");
  if (k == 0) return NoiseMatrix();
  NoiseMatrix m(k, sc ? Scenario::adversarial : Scenario::natural);
  auto flat = r.vec<double>("noise matrix entries");
  if (flat.size() != k * k)
    throw CheckpointError("noise matrix entry count mismatch", r.offset());
  m.flat() = std::move(flat);
  return m;
}

void write_tally(ByteWriter& w, const TallySnapshot& t) {
  w.vec(t.correct);
  w.vec(t.total);
  w.vec(t.carry);
}

TallySnapshot read_tally(ByteReader& r) {
  TallySnapshot t;
  t.correct = r.vec<long long>("tally correct");
  t.total = r.vec<long long>("tally total");
  t.carry = r.vec<double>("tally carry");
  return t;
}

}  // namespace

Checkpoint snapshot_model(Model<float>& model) {
  Checkpoint ck;
  ck.spec = model.spec();
  for (auto& p : model.params())
    ck.params.push_back({p.name, p.value->shape(), p.value->vec()});
  return ck;
}

void restore_params(Model<float>& model, const Checkpoint& ck) {
  auto params = model.params();
  if (params.size() != ck.params.size())
    throw CheckpointError("parameter count mismatch: model has " +
                              std::to_string(params.size()) + ", checkpoint has " +
                              std::to_string(ck.params.size()),
                          0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& stored = ck.params[i];
    if (params[i].name != stored.name)
      throw CheckpointError("parameter name mismatch at index " + std::to_string(i) + ": '" +
                                params[i].name + "' vs '" + stored.name + "'",
                            0);
    if (params[i].value->shape() != stored.shape)
      throw CheckpointError("shape mismatch for parameter '" + stored.name + "'", 0);
    params[i].value->vec() = stored.data;
  }
}

Model<float> model_from_checkpoint(const Checkpoint& ck, bool trainable,
                                   std::optional<std::size_t> expected_classes) {
  if (expected_classes && ck.spec.num_classes != *expected_classes)
    throw CheckpointError("checkpoint has num_classes=" +
                              std::to_string(ck.spec.num_classes) + " but " +
                              std::to_string(*expected_classes) + " classes were expected",
                          0);
  Model<float> model = make_model<float>(ck.spec, trainable);
  restore_params(model, ck);
  return model;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  ByteWriter w;
  w.raw(kMagic, 4);
  w.pod<std::uint32_t>(Checkpoint::kVersion);
  w.str(to_string(ck.spec.architecture));
  w.pod<std::uint64_t>(ck.spec.num_classes);
  w.pod<std::uint64_t>(ck.spec.channels);
  w.pod<std::uint64_t>(ck.spec.height);
  w.pod<std::uint64_t>(ck.spec.width);
  write_named_tensors(w, ck.params);
  w.pod<std::uint8_t>(ck.has_train_state ? 1 : 0);
  if (ck.has_train_state) {
    write_named_tensors(w, ck.momentum);
    w.pod<std::uint64_t>(ck.epoch);
    w.pod<std::uint64_t>(ck.global_step);
    w.pod<std::uint64_t>(ck.master_seed);
    w.str(ck.rng_state);
    write_noise(w, ck.m1);
    write_noise(w, ck.m2);
    write_tally(w, ck.tally_nat);
    write_tally(w, ck.tally_adv);
    w.pod<double>(ck.best_robust_acc);
    w.pod<std::uint64_t>(ck.best_epoch);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing", 0);
  out.write(reinterpret_cast<const char*>(w.bytes().data()),
            static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw CheckpointError("short write to '" + path + "'", w.bytes().size());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path + "'", 0);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  ByteReader r(bytes.data(), bytes.size());

  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("bad magic; not a checkpoint file", 0);
  const auto version = r.pod<std::uint32_t>("version");
  if (version != Checkpoint::kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version), 4);

  Checkpoint ck;
  ck.spec.architecture = parse_architecture(r.str("architecture"));
  ck.spec.num_classes = r.pod<std::uint64_t>("num_classes");
  ck.spec.channels = r.pod<std::uint64_t>("channels");
  ck.spec.height = r.pod<std::uint64_t>("height");
  ck.spec.width = r.pod<std::uint64_t>("width");
  ck.params = read_named_tensors(r, "parameters");
  ck.has_train_state = r.pod<std::uint8_t>("train-state flag") != 0;
  if (ck.has_train_state) {
    ck.momentum = read_named_tensors(r, "momentum buffers");
    ck.epoch = r.pod<std::uint64_t>("epoch");
    ck.global_step = r.pod<std::uint64_t>("global step");
    ck.master_seed = r.pod<std::uint64_t>("master seed");
    ck.rng_state = r.str("rng state");
    ck.m1 = read_noise(r);
    ck.m2 = read_noise(r);
    ck.tally_nat = read_tally(r);
    ck.tally_adv = read_tally(r);
    ck.best_robust_acc = r.pod<double>("best robust accuracy");
    ck.best_epoch = r.pod<std::uint64_t>("best epoch");
  }
  if (!r.done())
    throw CheckpointError(std::to_string(bytes.size() - r.offset()) +
                              " trailing bytes after checkpoint payload",
                          r.offset());
  return ck;
}

}  // namespace crdnd
