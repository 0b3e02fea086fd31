#include "kdvb/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kdvb {

namespace {

using nlohmann::json;

// Matrices are stored as flat row-major arrays of length n*n.
json matrix_to_json(const MatrixXd& M) {
  json flat = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      flat.push_back(M(i, j));
    }
  }
  return flat;
}

MatrixXd matrix_from_json(const json& flat, int n, const char* field) {
  if (!flat.is_array() ||
      static_cast<long long>(flat.size()) !=
          static_cast<long long>(n) * static_cast<long long>(n)) {
    throw std::runtime_error(std::string("kernel file: field ") + field +
                             " must be a flat row-major array of length n*n");
  }
  MatrixXd M(n, n);
  size_t idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      M(i, j) = flat[idx++].get<double>();
    }
  }
  return M;
}

json vector_to_json(const VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back(v(i));
  }
  return arr;
}

VectorXd vector_from_json(const json& arr, int n, const char* field) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != n) {
    throw std::runtime_error(std::string("kernel file: field ") + field +
                             " must have one entry per node");
  }
  VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    v(i) = arr[static_cast<size_t>(i)].get<double>();
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_kernel_json(const std::string& path, const KernelPair& kp) {
  json j;
  j["L"] = kp.grid.gx.length_L;
  j["n"] = kp.grid.gx.n();
  j["lambda"] = kp.lambda;
  j["k_vals"] = matrix_to_json(kp.k_vals);
  j["s_vals"] = matrix_to_json(kp.s_vals);
  j["trace_kx0"] = vector_to_json(kp.trace_kx0);
  j["trace_sx0"] = vector_to_json(kp.trace_sx0);
  j["trace_kxL"] = vector_to_json(kp.trace_kxL);
  j["trace_sxL"] = vector_to_json(kp.trace_sxL);
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << j.dump() << "\n";
}

KernelPair read_kernel_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open kernel file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("kernel file is not valid JSON: " +
                             std::string(e.what()));
  }
  for (const char* key :
       {"L", "n", "lambda", "k_vals", "s_vals", "trace_kx0", "trace_sx0",
        "trace_kxL", "trace_sxL"}) {
    if (!j.contains(key)) {
      throw std::runtime_error(std::string("kernel file: missing field /") +
                               key);
    }
  }
  const double L = j["L"].get<double>();
  const int n = j["n"].get<int>();
  KernelPair kp;
  kp.grid = make_grid2(make_grid(L, n));
  kp.lambda = j["lambda"].get<double>();
  kp.k_vals = matrix_from_json(j["k_vals"], n, "k_vals");
  kp.s_vals = matrix_from_json(j["s_vals"], n, "s_vals");
  kp.trace_kx0 = vector_from_json(j["trace_kx0"], n, "trace_kx0");
  kp.trace_sx0 = vector_from_json(j["trace_sx0"], n, "trace_sx0");
  kp.trace_kxL = vector_from_json(j["trace_kxL"], n, "trace_kxL");
  kp.trace_sxL = vector_from_json(j["trace_sxL"], n, "trace_sxL");
  return kp;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << "t,E,f,g,x0_norm,target_norm\n";
  const bool closed = traj.control == Control::closed_loop;
  for (size_t i = 0; i < traj.times.size(); ++i) {
    out << format_double(traj.times[i]) << ',' << format_double(traj.energies[i])
        << ',' << format_double(traj.controls_f[i]) << ','
        << format_double(traj.controls_g[i]) << ','
        << format_double(traj.x0_norms[i]) << ',';
    if (closed) {
      out << format_double(traj.target_norms[i]);
    }
    out << '\n';
  }
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot hash missing file: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

void append_manifest(const std::string& path, const ManifestEntry& entry) {
  json arr = json::array();
  {
    std::ifstream in(path);
    if (in) {
      try {
        in >> arr;
      } catch (const json::parse_error&) {
        throw std::runtime_error("manifest exists but is not valid JSON: " +
                                 path);
      }
      if (!arr.is_array()) {
        throw std::runtime_error("manifest is not a JSON array: " + path);
      }
    }
  }
  json e;
  e["subcommand"] = entry.subcommand;
  e["resolved_config"] = entry.resolved_config;
  json hashes = json::object();
  for (const auto& [p, h] : entry.input_hashes) {
    hashes[p] = h;
  }
  e["input_hashes"] = hashes;
  e["output_paths"] = entry.output_paths;
  e["duration_ms"] = entry.duration_ms;
  e["version"] = kVersionString;
  e["warnings"] = entry.warnings;
  e["status"] = entry.status;
  arr.push_back(std::move(e));
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open manifest for writing: " + path);
  }
  out << arr.dump(2) << "\n";
}

}  // namespace kdvb
