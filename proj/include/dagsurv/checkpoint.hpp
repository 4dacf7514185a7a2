#pragma once

// Plain-text model checkpoints.
//
//   dagsurv-checkpoint 1
//   <key> <value>                 one line per scalar setting
//   matrix <name> <rows> <cols>   followed by <rows> lines of <cols> values
//   end
//
// Scalar keys: horizon, max_time, activation, encoder_layers, encoder_hidden,
// decoder_layers, decoder_hidden, mixer_layers, mixer_hidden, use_sem.
// Matrices: adjacency, feature_mean, feature_scale, then every network
// parameter by name (encoder.K.weight, encoder.K.bias, mixer.*, decoder.*).
// Values are written with 17 significant digits, so loading reproduces the
// model bit for bit.

#include <map>
#include <string>

#include "dagsurv/io.hpp"
#include "dagsurv/model.hpp"

namespace dagsurv {

inline constexpr const char* kCheckpointMagic = "dagsurv-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline void append_matrix(std::string& out, const std::string& name, const Matrix& m) {
  out += "matrix " + name + ' ' + std::to_string(m.rows()) + ' ' + std::to_string(m.cols()) + '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      out += io::format_double(m(r, c));
    }
    out += '\n';
  }
}

}  // namespace detail

inline std::string format_checkpoint(DagSurvModel& model) {
  const auto& c = model.config();
  std::string out = std::string(kCheckpointMagic) + ' ' + std::to_string(kCheckpointVersion) + '\n';
  out += "horizon " + std::to_string(model.horizon()) + '\n';
  out += "max_time " + io::format_double(model.grid().max_time) + '\n';
  out += "activation " + to_string(c.activation) + '\n';
  out += "encoder_layers " + std::to_string(c.encoder_layers) + '\n';
  out += "encoder_hidden " + std::to_string(c.encoder_hidden) + '\n';
  out += "decoder_layers " + std::to_string(c.decoder_layers) + '\n';
  out += "decoder_hidden " + std::to_string(c.decoder_hidden) + '\n';
  out += "mixer_layers " + std::to_string(c.mixer_layers) + '\n';
  out += "mixer_hidden " + std::to_string(c.mixer_hidden) + '\n';
  out += "use_sem " + std::to_string(c.use_sem ? 1 : 0) + '\n';
  detail::append_matrix(out, "adjacency", model.dag().adjacency());
  detail::append_matrix(out, "feature_mean", model.standardizer().mean);
  detail::append_matrix(out, "feature_scale", model.standardizer().scale);
  for (auto* p : model.parameters()) detail::append_matrix(out, p->name, p->value);
  out += "end\n";
  return out;
}

inline DagSurvModel parse_checkpoint(const std::string& text,
                                     const std::string& file = "<checkpoint>") {
  auto ls = io::lines(text);
  std::size_t ln = 0;
  auto next = [&]() -> std::vector<std::string_view> {
    while (ln < ls.size()) {
      auto toks = io::split_ws(ls[ln++]);
      if (!toks.empty()) return toks;
    }
    throw ParseError(file, ln, "unexpected end of checkpoint");
  };

  auto head = next();
  if (head.size() != 2 || head[0] != kCheckpointMagic)
    throw ParseError(file, ln, "not a dagsurv checkpoint");
  if (io::parse_int(head[1], file, ln) != kCheckpointVersion)
    throw ParseError(file, ln, "unsupported checkpoint version");

  std::map<std::string, std::string> scalars;
  std::map<std::string, Matrix> matrices;
  std::vector<std::string> matrix_order;
  while (true) {
    auto toks = next();
    if (toks[0] == "end") break;
    if (toks[0] == "matrix") {
      if (toks.size() != 4) throw ParseError(file, ln, "matrix header needs name rows cols");
      const std::string name(toks[1]);
      const auto rows = io::parse_int(toks[2], file, ln);
      const auto cols = io::parse_int(toks[3], file, ln);
      if (rows < 0 || cols < 0) throw ParseError(file, ln, "negative matrix size");
      Matrix m(rows, cols);
      for (long long r = 0; r < rows; ++r) {
        auto vals = next();
        if (static_cast<long long>(vals.size()) != cols)
          throw ParseError(file, ln, "matrix '" + name + "' row has wrong length");
        for (long long c = 0; c < cols; ++c)
          m(r, c) = io::parse_double(vals[static_cast<std::size_t>(c)], file, ln);
      }
      if (matrices.count(name)) throw ParseError(file, ln, "duplicate matrix '" + name + "'");
      matrices.emplace(name, std::move(m));
      matrix_order.push_back(name);
    } else {
      if (toks.size() != 2) throw ParseError(file, ln, "expected '<key> <value>'");
      scalars[std::string(toks[0])] = std::string(toks[1]);
    }
  }

  auto scalar = [&](const char* key) -> const std::string& {
    auto it = scalars.find(key);
    if (it == scalars.end()) throw ParseError(file, ln, std::string("missing key '") + key + "'");
    return it->second;
  };
  auto integer = [&](const char* key) {
    return static_cast<int>(io::parse_int(scalar(key), file, ln));
  };
  auto matrix = [&](const std::string& key) -> Matrix& {
    auto it = matrices.find(key);
    if (it == matrices.end()) throw ParseError(file, ln, "missing matrix '" + key + "'");
    return it->second;
  };

  ModelConfig cfg;
  cfg.activation = parse_activation(scalar("activation"));
  cfg.encoder_layers = integer("encoder_layers");
  cfg.encoder_hidden = integer("encoder_hidden");
  cfg.decoder_layers = integer("decoder_layers");
  cfg.decoder_hidden = integer("decoder_hidden");
  cfg.mixer_layers = integer("mixer_layers");
  cfg.mixer_hidden = integer("mixer_hidden");
  cfg.use_sem = integer("use_sem") != 0;
  const int horizon = integer("horizon");

  DagSurvModel model(validate_dag(matrix("adjacency")), horizon, cfg, 0);
  TimeGrid grid{horizon, io::parse_double(scalar("max_time"), file, ln)};
  model.set_grid(grid);
  Standardizer st{matrix("feature_mean"), matrix("feature_scale")};
  if (st.mean.cols() != static_cast<Eigen::Index>(model.num_covariates()) ||
      st.scale.cols() != st.mean.cols() || st.mean.rows() != 1 || st.scale.rows() != 1)
    throw ParseError(file, ln, "feature standardization has the wrong shape");
  model.set_standardizer(std::move(st));
  for (auto* p : model.parameters()) {
    Matrix& m = matrix(p->name);
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
      throw ParseError(file, ln, "parameter '" + p->name + "' has the wrong shape");
    p->value = m;
    p->zero_grad();
  }
  const std::size_t expected = 3 + model.parameters().size();
  if (matrix_order.size() != expected)
    throw ParseError(file, ln, "checkpoint has unexpected extra matrices");
  return model;
}

inline void save_checkpoint(const std::string& path, DagSurvModel& model) {
  io::write_file(path, format_checkpoint(model));
}

inline DagSurvModel load_checkpoint(const std::string& path) {
  return parse_checkpoint(io::read_file(path), path);
}

}  // namespace dagsurv
