#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "durflow/nn.hpp"
#include "durflow/tensor.hpp"

namespace durflow {

// Reserved token ids; phone classes start at kFirstPhone.
inline constexpr int kBlank = 0;
inline constexpr int kPause = 1;
inline constexpr int kFiller = 2;
inline constexpr int kFirstPhone = 3;

struct PhoneSequence {
  std::vector<int> ids;
  bool interleaved = false;

  bool operator==(const PhoneSequence&) const = default;
};

/// Inserts a blank after every token: [a, b] -> [a, BLANK, b, BLANK].
/// Throws std::invalid_argument if the input already holds a blank.
std::vector<int> interleave_blanks(std::span<const int> ids);
PhoneSequence interleave(const PhoneSequence& seq);

/// True when every odd position is a blank and the length is even.
bool is_interleaved(std::span<const int> ids);

/// Encoder output: one column per (interleaved) token.
struct ConditioningSequence {
  Tensor vectors;                  // [D x T]
  std::vector<std::uint8_t> mask;  // 1 = position counts towards losses

  std::size_t length() const { return mask.size(); }
};

struct EncoderConfig {
  std::size_t vocab_size = 24;
  std::size_t dim = 256;
  std::size_t kernel = 3;
};

/// Embedding -> conv1d -> layer norm -> ReLU.
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParameterRegistry& registry, const EncoderConfig& config);

  /// Requires an interleaved sequence. Output is [dim x ids.size()], all
  /// positions unmasked.
  ConditioningSequence encode(const PhoneSequence& seq) const;
  Tensor forward(std::span<const int> ids) const;

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  Embedding embedding_;
  Conv1d conv_;
  LayerNorm norm_;
};

}  // namespace durflow
