#include "red/dataset.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "red/error.hpp"
#include "red/format.hpp"

namespace red {

Matrix ExpertDataset::joint_inputs() const {
  Matrix x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

int ExpertDataset::action_index(Eigen::Index i) const {
  require(action_space.kind == ActionSpace::Kind::discrete, "NonDiscreteInput",
          "action index requested for a continuous action space");
  Eigen::Index best = 0;
  actions.col(i).maxCoeff(&best);
  return static_cast<int>(best);
}

void ExpertDataset::validate() const {
  require(states.cols() >= 1, "EmptyDataset", "expert dataset has no pairs");
  require(actions.cols() == states.cols(), "ShapeMismatch", "state/action pair counts differ");
  require(actions.rows() == action_space.encoding_dim(), "ShapeMismatch",
          "action encoding width does not match the action space");
  require(states.allFinite() && actions.allFinite(), "NonFiniteInput", "dataset contains NaN/inf");
}

Vector one_hot(int index, int size) {
  require(index >= 0 && index < size, "InvalidAction",
          "action index " + std::to_string(index) + " out of range");
  Vector v = Vector::Zero(size);
  v(index) = 1.0;
  return v;
}

Vector joint_input(const Vector& state, const Vector& action_encoding) {
  Vector x(state.size() + action_encoding.size());
  x << state, action_encoding;
  return x;
}

std::filesystem::path dataset_meta_path(const std::filesystem::path& csv_path) {
  return csv_path.string() + ".meta.json";
}

void save_dataset(const ExpertDataset& data, const std::filesystem::path& csv_path) {
  data.validate();
  std::ofstream out(csv_path);
  require(static_cast<bool>(out), "IoError", "cannot write " + csv_path.string());
  for (int i = 0; i < data.state_dim(); ++i) out << (i ? "," : "") << "s_" << i;
  for (Eigen::Index i = 0; i < data.actions.rows(); ++i) out << ",a_enc_" << i;
  out << '\n';
  for (Eigen::Index c = 0; c < data.size(); ++c) {
    for (Eigen::Index r = 0; r < data.states.rows(); ++r) {
      out << (r ? "," : "") << format_double(data.states(r, c));
    }
    for (Eigen::Index r = 0; r < data.actions.rows(); ++r) out << ',' << format_double(data.actions(r, c));
    out << '\n';
  }

  const nlohmann::json meta = {
      {"action_space",
       {{"kind", data.action_space.kind == ActionSpace::Kind::discrete ? "discrete" : "continuous"},
        {"size", data.action_space.size}}},
      {"source", data.source},
      {"seed", data.seed}};
  std::ofstream meta_out(dataset_meta_path(csv_path));
  meta_out << meta.dump(2) << '\n';
}

ExpertDataset load_dataset(const std::filesystem::path& csv_path) {
  if (!std::filesystem::exists(csv_path)) {
    fail("DatasetNotFound", "dataset file " + csv_path.string() + " does not exist");
  }
  const auto meta_path = dataset_meta_path(csv_path);
  if (!std::filesystem::exists(meta_path)) {
    fail("DatasetNotFound", "dataset metadata " + meta_path.string() + " does not exist");
  }
  ExpertDataset data;
  {
    std::ifstream meta_in(meta_path);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(meta_in);
      const auto& space = meta.at("action_space");
      const auto kind = space.at("kind").get<std::string>();
      require(kind == "discrete" || kind == "continuous", "InvalidDataset",
              "unknown action space kind " + kind);
      data.action_space.kind =
          kind == "discrete" ? ActionSpace::Kind::discrete : ActionSpace::Kind::continuous;
      data.action_space.size = space.at("size").get<int>();
      data.source = meta.value("source", "");
      data.seed = meta.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
      fail("InvalidDataset", std::string("bad dataset metadata: ") + e.what());
    }
  }

  std::ifstream in(csv_path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "InvalidDataset", "missing CSV header");
  int state_cols = 0;
  int action_cols = 0;
  {
    std::stringstream header(line);
    std::string name;
    while (std::getline(header, name, ',')) {
      if (name.rfind("s_", 0) == 0) {
        require(action_cols == 0, "InvalidDataset", "state column after action columns");
        ++state_cols;
      } else if (name.rfind("a_enc_", 0) == 0) {
        ++action_cols;
      } else {
        fail("InvalidDataset", "unexpected CSV column '" + name + "'");
      }
    }
  }
  require(action_cols == data.action_space.encoding_dim(), "InvalidDataset",
          "action columns do not match metadata");

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail("InvalidDataset", "non-numeric cell '" + cell + "'");
      }
    }
    require(row.size() == static_cast<std::size_t>(state_cols + action_cols), "InvalidDataset",
            "row has " + std::to_string(row.size()) + " cells");
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  data.states.resize(state_cols, n);
  data.actions.resize(action_cols, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& row = rows[static_cast<std::size_t>(c)];
    for (int r = 0; r < state_cols; ++r) data.states(r, c) = row[static_cast<std::size_t>(r)];
    for (int r = 0; r < action_cols; ++r) {
      data.actions(r, c) = row[static_cast<std::size_t>(state_cols + r)];
    }
  }
  data.validate();
  return data;
}

}  // namespace red
