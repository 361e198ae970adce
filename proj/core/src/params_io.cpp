#include "icl/params_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "icl/format.hpp"
#include "icl/hash.hpp"

namespace icl {

static_assert(std::endian::native == std::endian::little, "params blob assumes a little-endian host");

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'I', 'C', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("params blob: truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensors(const std::vector<std::string>& names, const std::vector<Tensor>& tensors) {
  if (names.size() != tensors.size()) throw std::invalid_argument("encode_tensors: names/tensors mismatch");
  std::string out(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    put(out, static_cast<std::uint32_t>(names[i].size()));
    out += names[i];
    put(out, static_cast<std::uint32_t>(tensors[i].rank()));
    for (std::size_t s : tensors[i].shape()) put(out, static_cast<std::uint64_t>(s));
    out.append(reinterpret_cast<const char*>(tensors[i].data()), tensors[i].size() * sizeof(double));
  }
  return out;
}

void decode_tensors(std::string_view bytes, std::vector<std::string>& names, std::vector<Tensor>& tensors) {
  Reader r(bytes);
  if (r.take(4) != std::string_view(kMagic, 4)) throw std::runtime_error("params blob: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw std::runtime_error("params blob: unsupported version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  names.clear();
  tensors.clear();
  for (std::uint32_t i = 0; i < count; ++i) {
    names.emplace_back(r.take(r.get<std::uint32_t>()));
    const auto rank = r.get<std::uint32_t>();
    if (rank > 3) throw std::runtime_error("params blob: rank above 3");
    std::vector<std::size_t> shape;
    std::size_t size = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
      shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
      size *= shape.back();
    }
    const std::string_view raw = r.take(size * sizeof(double));
    std::vector<double> values(size);
    std::memcpy(values.data(), raw.data(), raw.size());
    tensors.emplace_back(std::move(shape), std::move(values));
  }
  if (!r.done()) throw std::runtime_error("params blob: trailing bytes");
}

std::string spec_to_json(const ModelSpec& s) {
  json j;
  j["variant"] = variant_name(s.variant);
  j["features"] = feature_mode_name(s.features);
  j["d"] = s.d;
  j["hidden"] = s.hidden;
  j["width"] = s.width;
  j["encoder_layers"] = s.encoder_layers;
  j["encoder_hidden"] = s.encoder_hidden;
  j["feature_radius"] = s.feature_radius;
  j["output_clip"] = s.output_clip;
  j["wavelet_m"] = s.wavelet_m;
  j["wavelet_k"] = s.wavelet_k;
  return j.dump();
}

ModelSpec spec_from_json(std::string_view text) {
  const json j = json::parse(text);
  ModelSpec s;
  s.variant = parse_variant(j.at("variant").get<std::string>());
  s.features = parse_feature_mode(j.at("features").get<std::string>());
  s.d = j.at("d").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.width = j.at("width").get<int>();
  s.encoder_layers = j.at("encoder_layers").get<int>();
  s.encoder_hidden = j.at("encoder_hidden").get<int>();
  s.feature_radius = j.at("feature_radius").get<double>();
  s.output_clip = j.at("output_clip").get<double>();
  s.wavelet_m = j.at("wavelet_m").get<int>();
  s.wavelet_k = j.at("wavelet_k").get<int>();
  s.validate();
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::filesystem::path save_params(const ModelParams& params, const std::filesystem::path& dir,
                                  const std::string& stem) {
  params.validate();
  std::filesystem::create_directories(dir);
  const std::string blob = encode_tensors(params.names, params.tensors);
  Fnv1a h;
  h.add_bytes(blob.data(), blob.size());
  json j;
  j["schema"] = "icl-lab/params/v1";
  j["blob"] = stem + ".bin";
  j["blob_fnv1a"] = hex64(h.value());
  j["spec"] = json::parse(spec_to_json(params.spec));
  j["tensors"] = json::array();
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    j["tensors"].push_back({{"name", params.names[i]}, {"shape", params.tensors[i].shape()}});
  }
  write_file(dir / (stem + ".bin"), blob);
  const auto manifest = dir / (stem + ".json");
  write_file(manifest, j.dump(2) + "\n");
  return manifest;
}

ModelParams load_params(const std::filesystem::path& path) {
  const std::filesystem::path manifest = std::filesystem::is_directory(path) ? path / "params.json" : path;
  const json j = json::parse(read_file(manifest));
  if (j.value("schema", "") != "icl-lab/params/v1") {
    throw std::runtime_error("load_params: unsupported manifest schema in " + manifest.string());
  }
  const std::string blob = read_file(manifest.parent_path() / j.at("blob").get<std::string>());
  Fnv1a h;
  h.add_bytes(blob.data(), blob.size());
  if (hex64(h.value()) != j.at("blob_fnv1a").get<std::string>()) {
    throw std::runtime_error("load_params: blob checksum mismatch");
  }
  ModelParams p;
  p.spec = spec_from_json(j.at("spec").dump());
  decode_tensors(blob, p.names, p.tensors);
  p.validate();
  return p;
}

}  // namespace icl
