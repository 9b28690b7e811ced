#include "durflow/encoder.hpp"

#include <stdexcept>
#include <string>

#include "durflow/ops.hpp"

namespace durflow {

std::vector<int> interleave_blanks(std::span<const int> ids) {
  std::vector<int> out;
  out.reserve(ids.size() * 2);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == kBlank) {
      throw std::invalid_argument("interleave_blanks: blank already present at position " +
                                  std::to_string(i));
    }
    out.push_back(ids[i]);
    out.push_back(kBlank);
  }
  return out;
}

PhoneSequence interleave(const PhoneSequence& seq) {
  if (seq.interleaved) return seq;
  return PhoneSequence{interleave_blanks(seq.ids), true};
}

bool is_interleaved(std::span<const int> ids) {
  if (ids.size() % 2 != 0) return false;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if ((i % 2 == 1) != (ids[i] == kBlank)) return false;
  }
  return true;
}

Encoder::Encoder(ParameterRegistry& registry, const EncoderConfig& config) : config_(config) {
  embedding_ = registry.embedding("encoder.embedding", config.vocab_size, config.dim);
  conv_ = registry.conv1d("encoder.conv", config.dim, config.dim, config.kernel);
  norm_ = registry.layer_norm("encoder.norm", config.dim);
}

Tensor Encoder::forward(std::span<const int> ids) const {
  Tensor x = embedding_.forward(ids);
  return relu(norm_.forward(conv_.forward(x)));
}

ConditioningSequence Encoder::encode(const PhoneSequence& seq) const {
  if (!seq.interleaved || !is_interleaved(seq.ids)) {
    throw std::invalid_argument("encode: sequence must be blank-interleaved");
  }
  return ConditioningSequence{forward(seq.ids), std::vector<std::uint8_t>(seq.ids.size(), 1)};
}

}  // namespace durflow
