#include "dalc/tensor.hpp"

#include <bit>
#include <string>

namespace dalc {

namespace {

constexpr std::uint8_t kMagic[4] = {'D', 'L', 'C', '1'};

void put_u32(std::uint32_t v, std::vector<std::uint8_t>& out) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyReference: return "EmptyReference";
    case ErrorCode::kEmptyList: return "EmptyList";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyTrace: return "EmptyTrace";
    case ErrorCode::kNonPositiveProbability: return "NonPositiveProbability";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kEmptySample: return "EmptySample";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kTooFewObservations: return "TooFewObservations";
    case ErrorCode::kDegenerateSizes: return "DegenerateSizes";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kNonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::kTooFewInstances: return "TooFewInstances";
    case ErrorCode::kMissingSample: return "MissingSample";
    case ErrorCode::kInsufficientDomains: return "InsufficientDomains";
    case ErrorCode::kNoGoldLabels: return "NoGoldLabels";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void append_tensor_record(const MatrixF& m, std::vector<std::uint8_t>& out) {
  out.reserve(out.size() + kTensorHeaderBytes + 4 * m.data().size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(static_cast<std::uint32_t>(m.rows()), out);
  put_u32(static_cast<std::uint32_t>(m.cols()), out);
  for (float v : m.data()) put_u32(std::bit_cast<std::uint32_t>(v), out);
}

std::vector<std::uint8_t> write_tensor_record(const MatrixF& m) {
  std::vector<std::uint8_t> out;
  append_tensor_record(m, out);
  return out;
}

MatrixF read_tensor_record(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < kTensorHeaderBytes) {
    throw Error(ErrorCode::kMalformedHeader, "tensor record shorter than header");
  }
  for (int i = 0; i < 4; ++i) {
    if (bytes[i] != kMagic[i]) throw Error(ErrorCode::kMalformedHeader, "bad tensor magic");
  }
  const std::uint64_t rows = get_u32(bytes.data() + 4);
  const std::uint64_t cols = get_u32(bytes.data() + 8);
  const std::uint64_t payload = rows * cols * 4;
  const std::uint64_t total = kTensorHeaderBytes + payload;
  if (bytes.size() < total) {
    throw Error(ErrorCode::kMalformedHeader,
                "tensor payload truncated: need " + std::to_string(total) + " bytes, have " +
                    std::to_string(bytes.size()));
  }
  if (consumed == nullptr && bytes.size() != total) {
    throw Error(ErrorCode::kMalformedHeader, "trailing bytes after tensor record");
  }
  std::vector<float> data(rows * cols);
  const std::uint8_t* p = bytes.data() + kTensorHeaderBytes;
  for (auto& v : data) {
    v = std::bit_cast<float>(get_u32(p));
    p += 4;
  }
  if (consumed != nullptr) *consumed = static_cast<std::size_t>(total);
  return MatrixF(rows, cols, std::move(data));
}

}  // namespace dalc
