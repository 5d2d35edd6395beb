#include "deeprec/architecture.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>

namespace deeprec {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_tokens(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    tokens.push_back(trim(text.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return tokens;
}

std::optional<double> parse_dropout_token(std::string_view token, std::size_t position) {
  if (token.size() < 4 || token.substr(0, 3) != "dp(") return std::nullopt;
  if (token.back() != ')') throw ArchitectureError("unterminated dp(...) token", position);
  const std::string_view inner = trim(token.substr(3, token.size() - 4));
  double p = 0.0;
  const auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), p);
  if (ec != std::errc{} || ptr != inner.data() + inner.size()) {
    throw ArchitectureError("malformed dropout probability '" + std::string(inner) + "'", position);
  }
  if (!(p >= 0.0 && p < 1.0)) {
    throw ArchitectureError("dropout probability must lie in [0, 1)", position);
  }
  return p;
}

std::size_t parse_dim(std::string_view token, std::size_t position) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw ArchitectureError("expected a layer width, got '" + std::string(token) + "'", position);
  }
  if (value == 0) throw ArchitectureError("layer width must be positive", position);
  return value;
}

std::string format_prob(double p) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), p);
  (void)ec;
  return std::string(buffer, ptr);
}

}  // namespace

std::vector<std::size_t> ArchitectureSpec::layer_dims(std::size_t n_items) const {
  std::vector<std::size_t> dims;
  dims.reserve(encoder_dims.size() + decoder_dims.size() + 2);
  dims.push_back(n_items);
  dims.insert(dims.end(), encoder_dims.begin(), encoder_dims.end());
  dims.insert(dims.end(), decoder_dims.begin(), decoder_dims.end());
  dims.push_back(n_items);
  return dims;
}

bool ArchitectureSpec::mirrored() const {
  if (encoder_dims.empty() || decoder_dims.size() + 1 != encoder_dims.size()) return false;
  return std::equal(decoder_dims.begin(), decoder_dims.end(), encoder_dims.rbegin() + 1);
}

void ArchitectureSpec::validate() const {
  require(!encoder_dims.empty(), "architecture needs at least one coding layer");
  require(dropout_prob >= 0.0 && dropout_prob < 1.0, "dropout probability must lie in [0, 1)");
  for (std::size_t d : encoder_dims) require(d > 0, "layer width must be positive");
  for (std::size_t d : decoder_dims) require(d > 0, "layer width must be positive");
  if (tied) {
    require(mirrored(), "tied weights need a decoder that mirrors the encoder: " +
                            serialize_architecture(*this));
  }
}

ArchitectureSpec parse_architecture(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw ArchitectureError("empty architecture string", 0);
  const auto tokens = split_tokens(text);
  if (tokens.front() != "n") throw ArchitectureError("architecture must start with 'n'", 0);
  if (tokens.size() < 2 || tokens.back() != "n") {
    throw ArchitectureError("architecture must end with 'n'", tokens.size() - 1);
  }

  ArchitectureSpec spec;
  std::vector<std::size_t> hidden;
  std::optional<std::size_t> dropout_at;  // number of hidden dims before dp
  for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
    if (auto p = parse_dropout_token(tokens[i], i)) {
      if (dropout_at) throw ArchitectureError("more than one dp(...) token", i);
      if (hidden.empty()) throw ArchitectureError("dp(...) needs a coding layer before it", i);
      dropout_at = hidden.size();
      spec.dropout_prob = *p;
      continue;
    }
    if (tokens[i] == "n") throw ArchitectureError("'n' may only appear at the ends", i);
    hidden.push_back(parse_dim(tokens[i], i));
  }
  if (hidden.empty()) throw ArchitectureError("no coding layer", 1);

  const std::size_t coding_end = dropout_at ? *dropout_at : (hidden.size() + 1) / 2;
  spec.encoder_dims.assign(hidden.begin(), hidden.begin() + static_cast<std::ptrdiff_t>(coding_end));
  spec.decoder_dims.assign(hidden.begin() + static_cast<std::ptrdiff_t>(coding_end), hidden.end());
  return spec;
}

std::string serialize_architecture(const ArchitectureSpec& spec) {
  std::string out = "n";
  for (std::size_t d : spec.encoder_dims) out += "," + std::to_string(d);
  const std::size_t hidden = spec.encoder_dims.size() + spec.decoder_dims.size();
  if (spec.dropout_prob > 0.0 || spec.encoder_dims.size() != (hidden + 1) / 2) {
    out += ",dp(" + format_prob(spec.dropout_prob) + ")";
  }
  for (std::size_t d : spec.decoder_dims) out += "," + std::to_string(d);
  out += ",n";
  return out;
}

std::size_t parameter_count(const ArchitectureSpec& spec, std::size_t n_items) {
  const auto dims = spec.layer_dims(n_items);
  const std::size_t layers = dims.size() - 1;
  std::size_t count = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    count += dims[l + 1];  // bias
    const bool shared = spec.tied && l >= spec.encoder_dims.size();
    if (!shared) count += dims[l] * dims[l + 1];
  }
  return count;
}

}  // namespace deeprec
