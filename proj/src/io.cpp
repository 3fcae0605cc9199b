#include "dpgm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dpgm {

Json structure_to_json(const ModelStructure& structure) {
  Json j;
  j["domain"] = structure.domain().cardinalities;
  j["cliques"] = structure.cliques();
  return j;
}

StructurePtr structure_from_json(const Json& j) {
  try {
    DomainSpec domain{j.at("domain").get<std::vector<int>>()};
    return make_structure(std::move(domain), j.at("cliques").get<std::vector<Scope>>());
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed structure: ") + e.what());
  }
}

Json blocks_to_json(const CliqueVector& v) {
  Json j = Json::object();
  const ModelStructure& st = v.structure();
  for (std::size_t c = 0; c < st.num_cliques(); ++c) {
    const auto blk = v.block(c);
    j[st.clique_key(c)] = std::vector<double>(blk.begin(), blk.end());
  }
  return j;
}

std::vector<double> blocks_from_json(const Json& j, const ModelStructure& structure) {
  std::vector<double> out(structure.dimension());
  if (!j.is_object() || j.size() != structure.num_cliques())
    throw IoError("table set must have exactly one entry per clique");
  for (std::size_t c = 0; c < structure.num_cliques(); ++c) {
    const std::string key = structure.clique_key(c);
    if (!j.contains(key)) throw IoError("missing table for clique " + key);
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != structure.table_size(c))
      throw IoError("table " + key + " has the wrong length");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_number()) throw IoError("table " + key + " holds a non-number");
      out[structure.offset(c) + i] = arr[i].get<double>();
    }
  }
  return out;
}

Json model_to_json(const Model& model) {
  Json j = structure_to_json(*model.structure);
  j["theta"] = blocks_to_json(model.theta);
  return j;
}

Model model_from_json(const Json& j) {
  StructurePtr st = structure_from_json(j);
  if (!j.contains("theta")) throw IoError("model file has no theta");
  Parameters theta(st, blocks_from_json(j.at("theta"), *st));
  theta.validate();
  return {st, std::move(theta)};
}

Json tables_to_json(const CliqueTableSet& tables) {
  Json j = structure_to_json(tables.structure());
  j["role"] = to_string(tables.role());
  j["tables"] = blocks_to_json(tables);
  return j;
}

CliqueTableSet tables_from_json(const Json& j, const StructurePtr& structure) {
  StructurePtr st = structure;
  if (!st) st = structure_from_json(j);
  if (!j.contains("tables")) throw IoError("no tables field");
  const TableRole role = j.contains("role") ? table_role_from_string(j.at("role").get<std::string>())
                                            : TableRole::counts;
  return CliqueTableSet(st, blocks_from_json(j.at("tables"), *st), role);
}

Json release_to_json(const PrivateRelease& release) {
  Json j = structure_to_json(release.y.structure());
  j["epsilon"] = release.epsilon;
  j["sensitivity"] = release.sensitivity;
  j["noise_scale"] = release.noise_scale;
  j["seed"] = release.seed;
  j["tables"] = blocks_to_json(release.y);
  return j;
}

PrivateRelease release_from_json(const Json& j) {
  StructurePtr st = structure_from_json(j);
  try {
    PrivateRelease r{CliqueTableSet(st, blocks_from_json(j.at("tables"), *st), TableRole::noisy),
                     j.at("epsilon").get<double>(), j.at("sensitivity").get<double>(), 0.0,
                     j.at("seed").get<std::uint64_t>()};
    if (!(r.epsilon > 0.0) || !(r.sensitivity > 0.0)) throw IoError("release needs positive epsilon and sensitivity");
    r.noise_scale = r.sensitivity / r.epsilon;
    return r;
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed release: ") + e.what());
  }
}

Json fit_to_json(const FitResult& fit) {
  Json j = structure_to_json(fit.theta_hat.structure());
  j["theta"] = blocks_to_json(fit.theta_hat);
  j["objective"] = fit.final_objective;
  j["grad_norm"] = fit.grad_norm;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["warnings"] = fit.warnings;
  return j;
}

Json bp_to_json(const BPResult& bp) {
  Json j;
  j["marginals"] = blocks_to_json(bp.marginals);
  j["log_partition"] = bp.log_partition;
  j["exact"] = bp.exact;
  j["converged"] = bp.converged;
  j["residual"] = bp.residual;
  j["iterations"] = bp.iterations;
  return j;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t t = 0; t < data.num_vars(); ++t) out << (t ? "," : "") << 'x' << t;
  if (data.weighted()) out << ",weight";
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto rec = data.record(i);
    for (std::size_t t = 0; t < rec.size(); ++t) out << (t ? "," : "") << rec[t];
    if (data.weighted()) out << ',' << format_double(data.weight(i));
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& s, const std::string& where) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw IoError(where + ": bad number '" + s + "'");
  return v;
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  const bool weighted = !header.empty() && header.back() == "weight";
  const std::size_t T = header.size() - (weighted ? 1 : 0);
  if (T == 0) throw IoError(path.string() + ": no attribute columns");
  Dataset data(T);
  std::vector<int> rec(T);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(row);
    if (cells.size() != header.size()) throw IoError(where + ": wrong number of columns");
    for (std::size_t t = 0; t < T; ++t) rec[t] = parse_number<int>(cells[t], where);
    data.add(rec, weighted ? parse_number<double>(cells[T], where) : 1.0);
  }
  return data;
}

}  // namespace dpgm
