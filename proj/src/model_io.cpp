#include "lglbci/model_io.hpp"

#include <cstring>

#include "byte_io.hpp"
#include "lglbci/error.hpp"

namespace lgl {

namespace {

constexpr char kMagic[4] = {'L', 'G', 'L', 'M'};

void put_matrix(detail::ByteWriter& w, const Matrix& m) {
  w.put(static_cast<std::uint64_t>(m.rows()));
  w.put(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) w.put(m(i, j));
  }
}

Matrix get_matrix(detail::ByteReader& r) {
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  if (rows != 0 && cols > r.remaining() / 8 / rows) throw Error(ErrorCode::DimensionMismatch, "matrix larger than payload");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = r.get<double>();
  }
  return m;
}

Vector get_vector(detail::ByteReader& r) {
  const Matrix m = get_matrix(r);
  if (m.cols() != 1) throw Error(ErrorCode::DimensionMismatch, "expected a column vector");
  return m.col(0);
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) throw Error(ErrorCode::DimensionMismatch, std::string(what) + " shape");
}

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelBundle& model) {
  detail::ByteWriter p;
  p.put_string(to_text(model.config));
  p.put(model.schema.sample_rate_hz);
  p.put(static_cast<std::uint64_t>(model.schema.channels));
  p.put(static_cast<std::uint64_t>(model.schema.samples_per_trial));
  p.put(static_cast<std::uint64_t>(model.schema.classes));
  p.put(static_cast<std::uint64_t>(model.windows));

  const auto& net = model.network;
  put_matrix(p, net.band_scale);
  for (const auto& st : net.stacks) {
    for (const auto& b : st.bimaps) put_matrix(p, b.weight());
    put_matrix(p, st.rbn.running_mean());
    put_matrix(p, st.rbn.bias());
  }

  const auto& sel = model.selection;
  put_matrix(p, sel.w_hat);
  p.put(static_cast<std::uint64_t>(sel.selected_channels.size()));
  for (auto c : sel.selected_channels) p.put(static_cast<std::uint64_t>(c));
  put_matrix(p, sel.l_matrix);
  p.put(static_cast<std::int32_t>(sel.iterations_run));
  p.put(static_cast<std::uint64_t>(sel.objective_trace.size()));
  for (double v : sel.objective_trace) p.put(v);
  p.put(sel.initial_gamma_gap);
  p.put(sel.final_gamma_gap);

  p.put(static_cast<std::uint64_t>(model.heads.size()));
  for (const auto& h : model.heads.heads) put_matrix(p, h);

  const auto& clf = model.classifier;
  put_matrix(p, clf.kernel);
  put_matrix(p, clf.conv_bias);
  put_matrix(p, clf.omega1);
  put_matrix(p, clf.omega2);
  put_matrix(p, clf.head_weight);
  put_matrix(p, clf.head_bias);
  p.put(static_cast<std::uint64_t>(model.parameter_count));

  const auto& payload = p.bytes();
  detail::ByteWriter out;
  out.put_bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  out.put(kModelVersion);
  out.put(static_cast<std::uint64_t>(payload.size()));
  out.put_bytes(payload);
  out.put(crc32(payload));
  return std::move(out.bytes());
}

ModelBundle decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::MalformedHeader, "not a model file");
  }
  detail::ByteReader header(bytes.subspan(4));
  const auto version = header.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw Error(ErrorCode::VersionMismatch, "model version " + std::to_string(version) + ", expected " +
                                                std::to_string(kModelVersion));
  }
  const auto length = header.get<std::uint64_t>();
  if (header.remaining() < 4 || length != header.remaining() - 4) {
    throw Error(ErrorCode::DimensionMismatch, "declared payload length does not match the file");
  }
  const auto payload = bytes.subspan(16, length);
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + 16 + length, 4);
  if (crc32(payload) != stored) throw Error(ErrorCode::ChecksumMismatch, "model checksum mismatch");

  detail::ByteReader r(payload);
  ModelBundle model;
  model.config = parse_config(r.get_string());
  model.schema.sample_rate_hz = r.get<double>();
  model.schema.channels = r.get<std::uint64_t>();
  model.schema.samples_per_trial = r.get<std::uint64_t>();
  model.schema.classes = r.get<std::uint64_t>();
  model.windows = r.get<std::uint64_t>();

  const std::size_t bands = model.config.bands.bands.size();
  model.network = ManifoldNetwork(bands, static_cast<Eigen::Index>(model.schema.channels), model.config);
  model.network.band_scale = get_vector(r);
  if (static_cast<std::size_t>(model.network.band_scale.size()) != bands) {
    throw Error(ErrorCode::DimensionMismatch, "band scale length");
  }
  for (auto& st : model.network.stacks) {
    for (auto& b : st.bimaps) {
      Matrix w = get_matrix(r);
      expect_shape(w, b.out_dim(), b.in_dim(), "BiMap weight");
      b.set_weight(std::move(w));
    }
    st.rbn.set_running_mean(get_matrix(r));
    Matrix bias = get_matrix(r);
    if (st.rbn.options().learn_bias) {
      st.rbn.set_bias(std::move(bias));
    } else if (bias.size() != 0) {
      throw Error(ErrorCode::DimensionMismatch, "RBN bias stored for a bias-free model");
    }
  }

  auto& sel = model.selection;
  sel.w_hat = get_matrix(r);
  sel.selected_channels.resize(r.get<std::uint64_t>());
  for (auto& c : sel.selected_channels) c = r.get<std::uint64_t>();
  sel.l_matrix = get_matrix(r);
  sel.iterations_run = r.get<std::int32_t>();
  const auto trace_len = r.get<std::uint64_t>();
  r.require(trace_len * 8);
  sel.objective_trace.resize(trace_len);
  for (auto& v : sel.objective_trace) v = r.get<double>();
  sel.initial_gamma_gap = r.get<double>();
  sel.final_gamma_gap = r.get<double>();

  const auto k = r.get<std::uint64_t>();
  if (k != model.config.heads) throw Error(ErrorCode::DimensionMismatch, "head count differs from the config");
  for (std::uint64_t i = 0; i < k; ++i) model.heads.heads.push_back(get_matrix(r));

  std::mt19937_64 unused(0);
  model.classifier = TangentClassifier(feature_shape(model), model.config.conv_maps, model.schema.classes, unused);
  auto& clf = model.classifier;
  auto load_into = [&](Matrix& dst, const char* what) {
    Matrix m = get_matrix(r);
    expect_shape(m, dst.rows(), dst.cols(), what);
    dst = std::move(m);
  };
  auto load_vec = [&](Vector& dst, const char* what) {
    Vector v = get_vector(r);
    if (v.size() != dst.size()) throw Error(ErrorCode::DimensionMismatch, std::string(what) + " length");
    dst = std::move(v);
  };
  load_into(clf.kernel, "conv kernel");
  load_vec(clf.conv_bias, "conv bias");
  load_into(clf.omega1, "omega1");
  load_into(clf.omega2, "omega2");
  load_into(clf.head_weight, "head weight");
  load_vec(clf.head_bias, "head bias");
  model.parameter_count = r.get<std::uint64_t>();
  if (r.remaining() != 0) throw Error(ErrorCode::DimensionMismatch, "trailing bytes in model payload");
  if (model.parameter_count != count_parameters(model)) {
    throw Error(ErrorCode::DimensionMismatch, "stored parameter count disagrees with the parameters");
  }
  return model;
}

void save_model(const ModelBundle& model, const std::filesystem::path& path) { write_file(path, encode_model(model)); }

ModelBundle load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

std::uint32_t model_hash(const ModelBundle& model) {
  // leave out the trailing CRC: a CRC over data followed by its own CRC is constant
  const auto bytes = encode_model(model);
  return crc32(std::span(bytes).first(bytes.size() - 4));
}

}  // namespace lgl
