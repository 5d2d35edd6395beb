#include "deeprec/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace deeprec {

namespace {

constexpr char kMagic[8] = {'D', 'E', 'E', 'P', 'R', 'E', 'C', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename V>
void write_pod(std::ostream& out, const V& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

template <typename V>
V read_pod(std::istream& in, const char* what) {
  V value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(V));
  if (!in) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  return value;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

double number_or_nan(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

template <typename T>
std::vector<const T*> tensor_views(const CheckpointRecord<T>& r, nlohmann::json& table) {
  std::vector<const T*> data;
  auto add = [&](const std::string& name, Index rows, Index cols, const T* ptr) {
    table.push_back({{"name", name}, {"rows", rows}, {"cols", cols}});
    data.push_back(ptr);
  };
  const auto& p = r.model.params();
  for (std::size_t i = 0; i < p.weights.size(); ++i)
    add("weight." + std::to_string(i), p.weights[i].rows(), p.weights[i].cols(), p.weights[i].data());
  for (std::size_t i = 0; i < p.biases.size(); ++i)
    add("bias." + std::to_string(i), 1, p.biases[i].size(), p.biases[i].data());
  for (std::size_t i = 0; i < r.velocity.weights.size(); ++i)
    add("velocity.weight." + std::to_string(i), r.velocity.weights[i].rows(),
        r.velocity.weights[i].cols(), r.velocity.weights[i].data());
  for (std::size_t i = 0; i < r.velocity.biases.size(); ++i)
    add("velocity.bias." + std::to_string(i), 1, r.velocity.biases[i].size(),
        r.velocity.biases[i].data());
  return data;
}

template <typename T>
const char* scalar_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename Src, typename Dst>
void read_tensor(std::istream& in, Index rows, Index cols, Dst* out, std::uint64_t& hash) {
  std::vector<Src> buffer(static_cast<std::size_t>(rows * cols));
  const auto bytes = buffer.size() * sizeof(Src);
  in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw CheckpointError("checkpoint truncated inside tensor payload");
  hash = fnv1a(reinterpret_cast<const char*>(buffer.data()), bytes, hash);
  for (std::size_t i = 0; i < buffer.size(); ++i) out[i] = static_cast<Dst>(buffer[i]);
}

}  // namespace

std::string architecture_signature(const ArchitectureSpec& spec) {
  return serialize_architecture(spec) + "|" + to_string(spec.activation) + "|" +
         (spec.tied ? "tied" : "untied");
}

template <typename T>
void save_checkpoint(const CheckpointRecord<T>& record, const std::string& path) {
  const auto& spec = record.model.spec();
  nlohmann::json header = {
      {"architecture", serialize_architecture(spec)},
      {"activation", to_string(spec.activation)},
      {"lrelu_slope", spec.activation.lrelu_slope},
      {"elu_alpha", spec.activation.elu_alpha},
      {"tied", spec.tied},
      {"n_items", record.model.n_items()},
      {"scalar", scalar_name<T>()},
      {"epoch", record.epoch},
      {"eval_rmse", number_or_null(record.eval_rmse)},
      {"train_mmse", number_or_null(record.train_mmse)},
      {"train_data", record.train_data},
      {"item_tokens", record.item_tokens},
      {"tensors", nlohmann::json::array()},
  };
  const auto tensors = tensor_views(record, header["tensors"]);
  const std::string header_text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kCheckpointVersion);
    write_pod(out, static_cast<std::uint64_t>(header_text.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    std::uint64_t payload = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& t = header["tensors"][i];
      const auto bytes = t["rows"].get<std::uint64_t>() * t["cols"].get<std::uint64_t>() * sizeof(T);
      out.write(reinterpret_cast<const char*>(tensors[i]), static_cast<std::streamsize>(bytes));
      hash = fnv1a(reinterpret_cast<const char*>(tensors[i]), bytes, hash);
      payload += bytes;
    }
    write_pod(out, payload);
    write_pod(out, hash);
    if (!out) throw CheckpointError("write failed for checkpoint '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw CheckpointError("cannot move checkpoint into place at '" + path + "'");
  }
}

template <typename T>
CheckpointRecord<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");

  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("'" + path + "' is not a deeprec checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = read_pod<std::uint64_t>(in, "header length");
  if (header_len > (1ULL << 32)) throw CheckpointError("checkpoint header length is implausible");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw CheckpointError("checkpoint truncated inside header");

  nlohmann::json header;
  ArchitectureSpec spec;
  std::size_t n_items = 0;
  bool stored_double = false;
  try {
    header = nlohmann::json::parse(header_text);
    spec = parse_architecture(header.at("architecture").get<std::string>());
    spec.activation = parse_activation(header.at("activation").get<std::string>());
    spec.activation.lrelu_slope = header.at("lrelu_slope").get<double>();
    spec.activation.elu_alpha = header.at("elu_alpha").get<double>();
    spec.tied = header.at("tied").get<bool>();
    n_items = header.at("n_items").get<std::size_t>();
    const auto scalar = header.at("scalar").get<std::string>();
    if (scalar != "f32" && scalar != "f64") throw CheckpointError("unknown scalar type " + scalar);
    stored_double = scalar == "f64";
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }

  // Build a zero-initialized template of the right shapes, then fill it.
  Parameters<T> params;
  {
    const auto dims = spec.layer_dims(n_items);
    const std::size_t layers = dims.size() - 1;
    const std::size_t stored = spec.tied ? spec.encoder_dims.size() : layers;
    for (std::size_t l = 0; l < stored; ++l)
      params.weights.push_back(Matrix<T>::Zero(static_cast<Index>(dims[l + 1]), static_cast<Index>(dims[l])));
    for (std::size_t l = 0; l < layers; ++l)
      params.biases.push_back(RowVector<T>::Zero(static_cast<Index>(dims[l + 1])));
  }
  Parameters<T> velocity = params.zeros_like();

  std::vector<std::pair<Index, T*>> slots;  // expected element count and destination
  for (auto& w : params.weights) slots.emplace_back(w.size(), w.data());
  for (auto& b : params.biases) slots.emplace_back(b.size(), b.data());
  for (auto& w : velocity.weights) slots.emplace_back(w.size(), w.data());
  for (auto& b : velocity.biases) slots.emplace_back(b.size(), b.data());

  const auto& table = header.at("tensors");
  if (table.size() != slots.size()) {
    throw CheckpointError("checkpoint tensor table does not match its architecture");
  }
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  std::uint64_t payload = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Index rows = table[i].at("rows").get<Index>();
    const Index cols = table[i].at("cols").get<Index>();
    if (rows * cols != slots[i].first) {
      throw CheckpointError("checkpoint tensor '" + table[i].at("name").get<std::string>() +
                            "' has the wrong size");
    }
    if (stored_double) {
      read_tensor<double>(in, rows, cols, slots[i].second, hash);
      payload += static_cast<std::uint64_t>(rows * cols) * sizeof(double);
    } else {
      read_tensor<float>(in, rows, cols, slots[i].second, hash);
      payload += static_cast<std::uint64_t>(rows * cols) * sizeof(float);
    }
  }
  const auto stored_payload = read_pod<std::uint64_t>(in, "payload length");
  const auto stored_hash = read_pod<std::uint64_t>(in, "payload hash");
  if (stored_payload != payload || stored_hash != hash) {
    throw CheckpointError("checkpoint payload is corrupt (hash mismatch)");
  }

  CheckpointRecord<T> record{
      header.value("epoch", 0),
      Autoencoder<T>(spec, n_items, std::move(params)),
      std::move(velocity),
      number_or_nan(header.value("eval_rmse", nlohmann::json())),
      number_or_nan(header.value("train_mmse", nlohmann::json())),
      header.at("item_tokens").get<std::vector<std::string>>(),
      header.value("train_data", std::string()),
  };
  if (!record.item_tokens.empty() && record.item_tokens.size() != n_items) {
    throw CheckpointError("checkpoint item vocabulary does not match n_items");
  }
  return record;
}

template <typename T>
CheckpointRecord<T> load_checkpoint(const std::string& path, const ArchitectureSpec& expected) {
  auto record = load_checkpoint<T>(path);
  const std::string have = architecture_signature(record.model.spec());
  const std::string want = architecture_signature(expected);
  if (have != want) {
    throw CheckpointError("checkpoint architecture '" + have + "' does not match requested '" + want + "'");
  }
  return record;
}

template void save_checkpoint<float>(const CheckpointRecord<float>&, const std::string&);
template void save_checkpoint<double>(const CheckpointRecord<double>&, const std::string&);
template CheckpointRecord<float> load_checkpoint<float>(const std::string&);
template CheckpointRecord<double> load_checkpoint<double>(const std::string&);
template CheckpointRecord<float> load_checkpoint<float>(const std::string&, const ArchitectureSpec&);
template CheckpointRecord<double> load_checkpoint<double>(const std::string&, const ArchitectureSpec&);

}  // namespace deeprec
