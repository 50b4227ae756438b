#include "okl/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include "okl/error.hpp"
#include "text.hpp"

namespace okl {

int Dataset::dimension() const {
  int dim = 0;
  for (const auto& x : features) {
    if (!x.empty()) dim = std::max(dim, x.back().index);
  }
  return dim;
}

std::vector<std::size_t> Dataset::task_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_tasks), 0);
  for (int t : tasks) ++counts[static_cast<std::size_t>(t)];
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.num_tasks = num_tasks;
  out.task_ids = task_ids;
  out.tasks.reserve(rows.size());
  out.labels.reserve(rows.size());
  out.features.reserve(rows.size());
  for (std::size_t r : rows) {
    out.tasks.push_back(tasks.at(r));
    out.labels.push_back(labels.at(r));
    out.features.push_back(features.at(r));
  }
  return out;
}

namespace {

struct RawSample {
  long long task_id;
  double label;
  SparseVector x;
};

RawSample parse_line(std::string_view line, std::size_t line_no) {
  RawSample sample{};
  std::size_t field = 0;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto begin = line.find_first_not_of(" \t\r", pos);
    if (begin == std::string_view::npos) break;
    auto end = line.find_first_of(" \t\r", begin);
    if (end == std::string_view::npos) end = line.size();
    const std::string_view token = line.substr(begin, end - begin);
    pos = end;

    if (field == 0) {
      const auto id = detail::to_integer(token);
      if (!id) throw ParseError("bad task id \"" + std::string(token) + "\"", line_no);
      sample.task_id = *id;
    } else if (field == 1) {
      const auto y = detail::to_double(token);
      if (!y) throw ParseError("bad label \"" + std::string(token) + "\"", line_no);
      sample.label = *y;
    } else {
      const auto colon = token.find(':');
      const auto bad = [&] {
        return ParseError("bad feature \"" + std::string(token) + "\"", line_no);
      };
      if (colon == std::string_view::npos) throw bad();
      const auto idx = detail::to_integer(token.substr(0, colon));
      const auto val = detail::to_double(token.substr(colon + 1));
      if (!idx || !val || *idx < 1 || *idx > std::numeric_limits<int>::max()) throw bad();
      sample.x.push_back({static_cast<int>(*idx), *val});
    }
    ++field;
  }
  if (field < 2) throw ParseError("expected \"<task> <label> [idx:val ...]\"", line_no);

  std::stable_sort(sample.x.begin(), sample.x.end(),
                   [](const Feature& a, const Feature& b) { return a.index < b.index; });
  for (std::size_t k = 1; k < sample.x.size(); ++k) {
    if (sample.x[k].index == sample.x[k - 1].index) {
      throw ParseError("duplicate feature index " + std::to_string(sample.x[k].index), line_no);
    }
  }
  return sample;
}

}  // namespace

Dataset parse_dataset(std::istream& in) {
  std::vector<RawSample> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    raw.push_back(parse_line(body, line_no));
  }

  std::map<long long, int> index_of;
  for (const auto& s : raw) index_of.emplace(s.task_id, 0);
  Dataset data;
  for (auto& [id, index] : index_of) {
    index = static_cast<int>(data.task_ids.size());
    data.task_ids.push_back(id);
  }
  data.num_tasks = static_cast<int>(data.task_ids.size());
  for (auto& s : raw) {
    data.tasks.push_back(index_of.at(s.task_id));
    data.labels.push_back(s.label);
    data.features.push_back(std::move(s.x));
  }
  return data;
}

Dataset parse_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file " + path);
  return parse_dataset(in);
}

void serialize_dataset(const Dataset& data, std::ostream& out) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.task_ids.at(static_cast<std::size_t>(data.tasks[i])) << ' '
        << detail::format_double(data.labels[i]);
    for (const auto& f : data.features[i]) {
      out << ' ' << f.index << ':' << detail::format_double(f.value);
    }
    out << '\n';
  }
}

void align_tasks(Dataset& data, std::span<const long long> reference_ids) {
  std::map<long long, int> index_of;
  for (std::size_t t = 0; t < reference_ids.size(); ++t) {
    index_of.emplace(reference_ids[t], static_cast<int>(t));
  }
  for (int& t : data.tasks) {
    const long long id = data.task_ids.at(static_cast<std::size_t>(t));
    const auto it = index_of.find(id);
    if (it == index_of.end()) {
      throw ValidationError("task id " + std::to_string(id) + " is unknown to the model");
    }
    t = it->second;
  }
  data.task_ids.assign(reference_ids.begin(), reference_ids.end());
  data.num_tasks = static_cast<int>(reference_ids.size());
}

OneVsAll one_vs_all(const Dataset& classes) {
  OneVsAll out;
  out.data.num_tasks = classes.num_tasks;
  out.data.task_ids = classes.task_ids;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (int t = 0; t < classes.num_tasks; ++t) {
      out.data.tasks.push_back(t);
      out.data.labels.push_back(classes.tasks[i] == t ? 1.0 : -1.0);
      out.data.features.push_back(classes.features[i]);
      out.origin.push_back(i);
    }
  }
  return out;
}

}  // namespace okl
