#include "prefalign/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace prefalign {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'A', '1'};

template <typename T>
void put_le(std::vector<unsigned char>& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& b) : bytes_(b) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw CheckpointError("checkpoint truncated");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 4;
};

Domain infer_domain(Paradigm p, const ParamSet& a) {
  Domain d;
  auto dims = [&](std::size_t k) -> const std::vector<std::size_t>& {
    if (k >= a.size()) throw CheckpointError("checkpoint has too few arrays");
    return a[k].shape();
  };
  auto as_int = [](std::size_t v) { return static_cast<int>(v); };
  switch (p) {
    case Paradigm::AR: {
      const auto& e = dims(ToyARModel::kEmit);
      if (e.size() != 3) throw CheckpointError("AR emit table must have rank 3");
      d.v_text = as_int(e[0]) - 1;
      d.speakers = as_int(e[1]);
      d.v_speech = as_int(e[2]);
      break;
    }
    case Paradigm::FM: {
      const auto& we = dims(ToyFMModel::kWordEmb);
      const auto& se = dims(ToyFMModel::kSpkEmb);
      const auto& w1 = dims(ToyFMModel::kW1);
      if (we.size() != 2 || se.size() != 2 || w1.size() != 2) throw CheckpointError("FM arrays must have rank 2");
      d.v_text = as_int(we[0]) - 1;
      d.embed = as_int(we[1]);
      d.speakers = as_int(se[0]);
      d.hidden = as_int(w1[0]);
      break;
    }
    case Paradigm::MGM: {
      const auto& e = dims(ToyMGMModel::kEmit);
      const auto& te = dims(ToyMGMModel::kTokEmb);
      if (e.size() != 3 || te.size() != 2) throw CheckpointError("MGM arrays have wrong rank");
      d.v_text = as_int(e[0]) - 1;
      d.speakers = as_int(e[1]);
      d.v_speech = as_int(e[2]);
      d.embed = as_int(te[1]);
      break;
    }
  }
  return d;
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const GenerativeModel& m) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(paradigm_of(m)));
  const auto& params = params_of(m);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& a : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.rank()));
    for (auto d : a.shape()) put_le<std::uint64_t>(out, d);
  }
  for (const auto& a : params)
    for (double v : a.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

GenerativeModel decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic");
  Reader r(bytes);
  const auto tag = r.get<std::uint32_t>();
  if (tag > 2) throw CheckpointError("unknown paradigm tag");
  const auto paradigm = static_cast<Paradigm>(tag);
  const auto count = r.get<std::uint32_t>();
  std::vector<std::vector<std::size_t>> shapes(count);
  for (auto& s : shapes) {
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw CheckpointError("bad array rank");
    for (std::uint32_t i = 0; i < rank; ++i) s.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
  }
  ParamSet params;
  for (auto& s : shapes) {
    DenseArray a(s);
    for (double& v : a.values()) v = std::bit_cast<double>(r.get<std::uint64_t>());
    params.push_back(std::move(a));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");

  const Domain d = infer_domain(paradigm, params);
  GenerativeModel model = [&]() -> GenerativeModel {
    switch (paradigm) {
      case Paradigm::AR: return ToyARModel::uniform(d);
      case Paradigm::FM: {
        RngStream rng(0, 0);
        return ToyFMModel::init(d, rng);
      }
      case Paradigm::MGM: return ToyMGMModel::uniform(d);
    }
    throw CheckpointError("unreachable");
  }();
  auto& dst = params_of(model);
  if (dst.size() != params.size()) throw CheckpointError("array count does not match paradigm");
  for (std::size_t k = 0; k < dst.size(); ++k)
    if (!dst[k].same_shape(params[k])) throw CheckpointError("array shape does not match paradigm");
  dst = std::move(params);
  return model;
}

void save_checkpoint(const GenerativeModel& m, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

GenerativeModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace prefalign
