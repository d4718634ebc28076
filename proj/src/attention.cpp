#include "icra/attention.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "icra/format.hpp"

namespace icra::attention {

namespace {

constexpr const char* kMagic = "icra-params";
constexpr int kVersion = 1;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string u_rows_text(const Mat& u) {
  std::string out;
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    out += "U";
    for (Eigen::Index c = 0; c < u.cols(); ++c) out += "," + format_double(u(r, c));
    out += "\n";
  }
  return out;
}

void check_shape(const AttentionParams& params, const prompts::PromptMatrix& prompt) {
  if (prompt.n_demos() < 1) throw ContractError("attention: prompt has no demonstrations");
  if (prompt.dim() != params.dim()) {
    throw ContractError("attention: prompt dimension " + std::to_string(prompt.dim()) +
                        " does not match U dimension " + std::to_string(params.dim()));
  }
  if (prompt.features.cols() != prompt.n_demos() + 1) {
    throw ContractError("attention: prompt must have N+1 feature columns");
  }
}

}  // namespace

Mat project_frobenius(const Mat& u, double radius, bool* hit) {
  const double norm = u.norm();
  const bool active = norm > radius;
  if (hit) *hit = active;
  return active ? Mat(u * (radius / norm)) : u;
}

AttentionParams::AttentionParams(Mat u, double radius) : u_(std::move(u)), radius_(radius) {
  if (u_.rows() != u_.cols() || u_.rows() < 1) throw ContractError("AttentionParams: U must be square");
  if (!(radius_ > 0.0)) throw ContractError("AttentionParams: radius must be positive");
  if (!u_.allFinite()) throw ContractError("AttentionParams: U has non-finite entries");
  u_ = project_frobenius(u_, radius_);
}

AttentionParams AttentionParams::zeros(Eigen::Index d, double radius) {
  return AttentionParams(Mat::Zero(d, d), radius);
}

bool AttentionParams::assign_projected(Mat u) {
  bool hit = false;
  u_ = project_frobenius(u, radius_, &hit);
  return hit;
}

Mat forward_full(const AttentionParams& params, const prompts::PromptMatrix& prompt) {
  check_shape(params, prompt);
  const auto d = prompt.dim();
  const auto n = prompt.n_demos();
  Mat e = Mat::Zero(d + 1, n + 1);
  e.topRows(d) = prompt.features;
  e.block(d, 0, 1, n) = prompt.labels.transpose();

  Mat w_v = Mat::Zero(d + 1, d + 1);
  w_v(d, d) = 1.0;
  Mat w_kq = Mat::Zero(d + 1, d + 1);
  w_kq.topLeftCorner(d, d) = params.u();

  const Mat attn = e.transpose() * w_kq * e / static_cast<double>(n);
  return e + w_v * e * attn;
}

Vec label_moment(const prompts::PromptMatrix& prompt) {
  return prompt.demo_features() * prompt.labels / static_cast<double>(prompt.n_demos());
}

double forward_logit(const AttentionParams& params, const prompts::PromptMatrix& prompt) {
  check_shape(params, prompt);
  return label_moment(prompt).dot(params.u() * prompt.query());
}

BinaryPrediction predict_binary(const AttentionParams& params, const prompts::PromptMatrix& prompt) {
  if (prompt.mode != LabelMode::binary) throw ContractError("predict_binary: prompt is not in binary mode");
  const double p = logistic(forward_logit(params, prompt));
  return {p, p > 0.5 ? 1 : -1};
}

double predict_regression(const AttentionParams& params, const prompts::PromptMatrix& prompt) {
  if (prompt.mode != LabelMode::response_time) {
    throw ContractError("predict_regression: prompt is not in response-time mode");
  }
  return forward_logit(params, prompt);
}

void save_params(const std::filesystem::path& path, const AttentionParams& params, LabelMode mode) {
  const std::string rows = u_rows_text(params.u());
  std::ostringstream out;
  out << kMagic << "," << kVersion << "\n";
  out << "d," << params.dim() << "\n";
  out << "radius," << format_double(params.radius()) << "\n";
  out << "mode," << to_string(mode) << "\n";
  out << rows;
  out << "checksum," << std::hex << fnv1a(rows) << "\n";
  write_text_file(path, out.str());
}

LoadedParams load_params(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  auto next_fields = [&](const char* expect) {
    if (!std::getline(in, line)) throw DataError(path.string() + ": truncated params file");
    auto fields = split(line, ',');
    if (fields.empty() || fields[0] != expect) {
      throw DataError(path.string() + ": expected '" + std::string(expect) + "' line, got '" + line + "'");
    }
    return fields;
  };
  auto magic = next_fields(kMagic);
  if (magic.size() != 2 || parse_int(magic[1]) != kVersion) throw DataError(path.string() + ": unsupported params version");
  const auto d = parse_int(next_fields("d").at(1));
  if (d < 1) throw DataError(path.string() + ": bad dimension");
  const double radius = parse_double(next_fields("radius").at(1));
  const LabelMode mode = parse_label_mode(next_fields("mode").at(1));
  Mat u(d, d);
  for (long r = 0; r < d; ++r) {
    auto fields = next_fields("U");
    if (static_cast<long>(fields.size()) != d + 1) throw DataError(path.string() + ": U row has wrong length");
    for (long c = 0; c < d; ++c) u(r, c) = parse_double(fields[static_cast<std::size_t>(c + 1)]);
  }
  const auto checksum = next_fields("checksum");
  std::ostringstream expect;
  expect << std::hex << fnv1a(u_rows_text(u));
  if (checksum.size() != 2 || checksum[1] != expect.str()) throw DataError(path.string() + ": checksum mismatch");
  return {AttentionParams(u, radius), mode};
}

}  // namespace icra::attention
