#include "previs/serialization.hpp"

namespace previs {

void to_json(Json &j, const ParameterSpace &s) {
  j = {{"names", s.names},
       {"lower", to_json_array(s.lower)},
       {"upper", to_json_array(s.upper)}};
}

void from_json(const Json &j, ParameterSpace &s) {
  s.names = j.at("names").get<std::vector<std::string>>();
  s.lower = vector_from_json(j.at("lower"));
  s.upper = vector_from_json(j.at("upper"));
  s.validate();
}

void to_json(Json &j, const EnsembleDesign &d) {
  j = {{"kind", to_string(d.kind)},
       {"seed", d.seed},
       {"space", d.space},
       {"rows", matrix_to_json(d.rows)}};
}

void from_json(const Json &j, EnsembleDesign &d) {
  d.kind = design_kind_from_string(j.value("kind", "custom"));
  d.seed = j.value("seed", std::uint64_t(0));
  d.space = j.at("space").get<ParameterSpace>();
  d.rows = matrix_from_json(j.at("rows"), d.space.size());
}

void to_json(Json &j, const OptimizerConfig &c) {
  j = {{"kind", to_string(c.kind)},   {"lr", c.lr},
       {"momentum", c.momentum},      {"eps", c.eps},
       {"epochs", c.epochs},          {"batch_size", c.batch_size},
       {"shuffle_seed", c.shuffle_seed}};
}

void from_json(const Json &j, OptimizerConfig &c) {
  const auto kind = optimizer_kind_from_string(
      j.value("kind", to_string(c.kind)));
  if (kind != c.kind)
    c = kind == OptimizerConfig::Kind::Adagrad ? OptimizerConfig::gcn_default()
                                               : OptimizerConfig::olff_default();
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.eps = j.value("eps", c.eps);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.shuffle_seed = j.value("shuffle_seed", c.shuffle_seed);
}

void to_json(Json &j, const OlffConfig &c) {
  j = {{"input_dim", c.input_dim}, {"hidden", c.hidden}, {"output", c.output}};
}

void from_json(const Json &j, OlffConfig &c) {
  c.input_dim = j.value("input_dim", c.input_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.output = j.value("output", c.output);
}

void to_json(Json &j, const GcnConfig &c) {
  j = {{"mu", c.mu},         {"channels", c.channels},
       {"filters", c.filters}, {"cheb_order", c.cheb_order},
       {"fc", c.fc},         {"output", c.output}};
}

void from_json(const Json &j, GcnConfig &c) {
  c.mu = j.value("mu", c.mu);
  c.channels = j.value("channels", c.channels);
  c.filters = j.value("filters", c.filters);
  c.cheb_order = j.value("cheb_order", c.cheb_order);
  c.fc = j.value("fc", c.fc);
  c.output = j.value("output", c.output);
}

void to_json(Json &j, const ImpactMetadata &m) {
  j = {{"kind", m.kind},
       {"model_id", m.model_id},
       {"span_lo", m.span_lo},
       {"span_hi", m.span_hi},
       {"a_pred", to_json_array(m.a_pred)},
       {"a_true", to_json_array(m.a_true)}};
  j["parameter"] = m.parameter ? Json(*m.parameter) : Json(nullptr);
  j["parameter_name"] = m.parameter_name ? Json(*m.parameter_name) : Json(nullptr);
}

void from_json(const Json &j, ImpactMetadata &m) {
  m.kind = j.value("kind", "");
  m.model_id = j.value("model_id", "");
  m.span_lo = j.value("span_lo", 0.0);
  m.span_hi = j.value("span_hi", 0.0);
  m.a_pred = vector_from_json(j.value("a_pred", Json::array()));
  m.a_true = vector_from_json(j.value("a_true", Json::array()));
  const Json &p = j.value("parameter", Json(nullptr));
  m.parameter = p.is_null() ? std::nullopt : std::optional<Index>(p.get<Index>());
  const Json &name = j.value("parameter_name", Json(nullptr));
  m.parameter_name = name.is_null()
                         ? std::nullopt
                         : std::optional<std::string>(name.get<std::string>());
}

MatrixXd f64_matrix(const Artifact &a, const std::string &name, Index rows,
                    Index cols) {
  const auto it = a.blobs.find(name);
  if (it == a.blobs.end())
    throw IntegrityError("artifact is missing blob '" + name + "'");
  if (it->second.dtype != "f64le")
    throw IntegrityError("blob '" + name + "' is not float64");
  const auto values = decode_le<double>(it->second.bytes);
  if (Index(values.size()) != rows * cols)
    throw IntegrityError("blob '" + name + "' has the wrong size");
  using RowMajor =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMajor>(values.data(), rows, cols);
}

VectorXd f64_vector(const Artifact &a, const std::string &name, Index size) {
  return f64_matrix(a, name, size, 1);
}

namespace {

void expect_kind(const Artifact &a, const char *kind) {
  if (a.kind != kind)
    throw InvalidArgument("expected a " + std::string(kind) + " artifact, got " +
                          a.kind);
}

} // namespace

Artifact encode(const SurfaceMesh &mesh) {
  Artifact a;
  a.kind = "mesh";
  a.meta = {{"id", mesh.id},
            {"nx", mesh.nx},
            {"ny", mesh.ny},
            {"vertex_count", mesh.vertex_count()},
            {"triangle_count", mesh.triangle_count()}};
  a.blobs["vertices"] = f64_blob(mesh.vertices);
  a.blobs["normals"] = f64_blob(mesh.normals);
  std::vector<std::uint32_t> tri(std::size_t(mesh.triangles.size()));
  for (Index i = 0; i < mesh.triangles.size(); ++i)
    tri[std::size_t(i)] = std::uint32_t(mesh.triangles.data()[i]);
  a.blobs["triangles"] = {"u32le", encode_le<std::uint32_t>(tri)};
  return a;
}

template <> SurfaceMesh decode<SurfaceMesh>(const Artifact &a) {
  expect_kind(a, "mesh");
  SurfaceMesh m;
  const Index nv = a.meta.at("vertex_count").get<Index>();
  const Index nt = a.meta.at("triangle_count").get<Index>();
  m.vertices = f64_matrix(a, "vertices", nv, 3);
  m.normals = f64_matrix(a, "normals", nv, 3);
  const auto &tri = a.blobs.at("triangles");
  const auto idx = decode_le<std::uint32_t>(tri.bytes);
  if (tri.dtype != "u32le" || Index(idx.size()) != 3 * nt)
    throw IntegrityError("triangle blob has the wrong size");
  m.triangles.resize(nt, 3);
  for (Index i = 0; i < 3 * nt; ++i)
    m.triangles.data()[i] = std::int32_t(idx[std::size_t(i)]);
  m.nx = a.meta.value("nx", 0);
  m.ny = a.meta.value("ny", 0);
  m.id = a.meta.at("id").get<std::string>();
  if (mesh_content_id(m.vertices, m.triangles) != m.id)
    throw IntegrityError("mesh content does not match its id " + m.id);
  return m;
}

Artifact encode(const Ensemble &e) {
  Artifact a;
  a.kind = "ensemble";
  const Index nv = e.fields.empty() ? 0 : e.fields.front().size();
  a.meta = {{"mesh_id", e.mesh_id},
            {"samples", e.size()},
            {"vertex_count", nv},
            {"design", e.design}};
  MatrixXd stacked(e.size() * nv, 3);
  for (Index s = 0; s < e.size(); ++s) {
    if (e.fields[std::size_t(s)].size() != nv)
      throw InvalidArgument("ensemble fields differ in vertex count");
    stacked.middleRows(s * nv, nv) = e.fields[std::size_t(s)].values;
  }
  a.blobs["fields"] = f64_blob(stacked);
  return a;
}

template <> Ensemble decode<Ensemble>(const Artifact &a) {
  expect_kind(a, "ensemble");
  Ensemble e;
  e.mesh_id = a.meta.at("mesh_id").get<std::string>();
  e.design = a.meta.at("design").get<EnsembleDesign>();
  const Index n = a.meta.at("samples").get<Index>();
  const Index nv = a.meta.at("vertex_count").get<Index>();
  if (n != e.design.size())
    throw IntegrityError("ensemble design and field counts disagree");
  const MatrixXd stacked = f64_matrix(a, "fields", n * nv, 3);
  e.fields.reserve(std::size_t(n));
  for (Index s = 0; s < n; ++s)
    e.fields.push_back({e.mesh_id, stacked.middleRows(s * nv, nv)});
  return e;
}

Artifact encode(const PcaBasis &b) {
  Artifact a;
  a.kind = "basis";
  a.meta = {{"mesh_id", b.mesh_id},
            {"k", b.k()},
            {"vertex_count", b.vertex_count()},
            {"parameter_count", b.parameter_count()},
            {"space", b.space}};
  a.blobs["mean_field"] = f64_blob(b.mean_field);
  a.blobs["basis_fields"] = f64_blob(b.basis_fields);
  a.blobs["basis_params"] = f64_blob(b.basis_params);
  a.blobs["mean_params"] = f64_blob(b.mean_params);
  a.blobs["explained_variance_ratio"] = f64_blob(b.explained_variance_ratio);
  a.blobs["singular_values"] = f64_blob(b.singular_values);
  return a;
}

template <> PcaBasis decode<PcaBasis>(const Artifact &a) {
  expect_kind(a, "basis");
  PcaBasis b;
  const Index k = a.meta.at("k").get<Index>();
  const Index nv = a.meta.at("vertex_count").get<Index>();
  const Index np = a.meta.at("parameter_count").get<Index>();
  b.mesh_id = a.meta.at("mesh_id").get<std::string>();
  b.space = a.meta.at("space").get<ParameterSpace>();
  b.mean_field = f64_vector(a, "mean_field", nv);
  b.basis_fields = f64_matrix(a, "basis_fields", nv, k);
  b.basis_params = f64_matrix(a, "basis_params", np, k);
  b.mean_params = f64_vector(a, "mean_params", np);
  b.explained_variance_ratio = f64_vector(a, "explained_variance_ratio", k);
  b.singular_values = f64_vector(a, "singular_values", k);
  return b;
}

Artifact encode(const Regressor &m) {
  Artifact a;
  a.kind = "model";
  Json segments = Json::array();
  for (const auto &s : m.weights.segments())
    segments.push_back(
        {{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  a.meta = {{"kind", to_string(m.kind)},
            {"seed", m.seed},
            {"mesh_id", m.mesh_id},
            {"weight_count", m.weights.size()},
            {"segments", segments},
            {"training_log", m.training_log},
            {"standardized", m.input_norm.fitted()}};
  if (m.kind == RegressorKind::Olff)
    a.meta["config"] = m.olff;
  else
    a.meta["config"] = m.gcn;
  a.meta["optimizer"] = m.optimizer ? Json(*m.optimizer) : Json(nullptr);
  a.blobs["weights"] = f64_blob(m.weights.values());
  if (m.input_norm.fitted()) {
    a.meta["input_size"] = m.input_norm.mean.size();
    a.blobs["input_mean"] = f64_blob(m.input_norm.mean);
    a.blobs["input_scale"] = f64_blob(m.input_norm.scale);
  }
  if (m.spectral) {
    a.meta["vertex_count"] = m.spectral->eigenvectors.rows();
    a.blobs["eigenvalues"] = f64_blob(m.spectral->eigenvalues);
    a.blobs["eigenvectors"] = f64_blob(m.spectral->eigenvectors);
    a.blobs["rescaled_eigenvalues"] = f64_blob(m.spectral->rescaled_eigenvalues);
  }
  return a;
}

template <> Regressor decode<Regressor>(const Artifact &a) {
  expect_kind(a, "model");
  Regressor m;
  m.kind = regressor_kind_from_string(a.meta.at("kind").get<std::string>());
  m.seed = a.meta.at("seed").get<std::uint64_t>();
  m.mesh_id = a.meta.at("mesh_id").get<std::string>();
  m.training_log = a.meta.at("training_log").get<std::vector<double>>();
  if (m.kind == RegressorKind::Olff) {
    m.olff = a.meta.at("config").get<OlffConfig>();
  } else {
    m.gcn = a.meta.at("config").get<GcnConfig>();
    auto op = std::make_shared<SpectralOperator>();
    op->mu = m.gcn.mu;
    const Index nv = a.meta.at("vertex_count").get<Index>();
    op->eigenvalues = f64_vector(a, "eigenvalues", op->mu);
    op->eigenvectors = f64_matrix(a, "eigenvectors", nv, op->mu);
    op->rescaled_eigenvalues = f64_vector(a, "rescaled_eigenvalues", op->mu);
    m.spectral = std::move(op);
  }
  if (!a.meta.at("optimizer").is_null()) {
    OptimizerConfig opt;
    from_json(a.meta.at("optimizer"), opt);
    m.optimizer = opt;
  }
  for (const auto &s : a.meta.at("segments")) {
    const Index offset = m.weights.add(s.at("name").get<std::string>(),
                                       s.at("rows").get<Index>(),
                                       s.at("cols").get<Index>());
    if (offset != s.at("offset").get<Index>())
      throw IntegrityError("model segment offsets are inconsistent");
  }
  m.weights.values() = f64_vector(a, "weights", m.weights.size());
  if (a.meta.value("standardized", false)) {
    const Index n = a.meta.at("input_size").get<Index>();
    m.input_norm.mean = f64_vector(a, "input_mean", n);
    m.input_norm.scale = f64_vector(a, "input_scale", n);
  }
  return m;
}

Artifact encode(const ComparisonReport &r) {
  Artifact a;
  a.kind = "report";
  a.meta = r;
  return a;
}

template <> ComparisonReport decode<ComparisonReport>(const Artifact &a) {
  expect_kind(a, "report");
  return a.meta.get<ComparisonReport>();
}

Artifact encode(const ImpactField &f) {
  Artifact a;
  a.kind = "field";
  a.meta = {{"mesh_id", f.field.mesh_id},
            {"vertex_count", f.field.size()},
            {"impact", f.meta}};
  a.blobs["values"] = f64_blob(f.field.values);
  return a;
}

Artifact encode(const ScalarField &f) {
  return encode(ImpactField{f, {}});
}

template <> ImpactField decode<ImpactField>(const Artifact &a) {
  expect_kind(a, "field");
  ImpactField f;
  f.field.mesh_id = a.meta.at("mesh_id").get<std::string>();
  f.field.values =
      f64_vector(a, "values", a.meta.at("vertex_count").get<Index>());
  f.meta = a.meta.at("impact").get<ImpactMetadata>();
  return f;
}

} // namespace previs
