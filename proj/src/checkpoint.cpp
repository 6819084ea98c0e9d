#include "trajevent/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "trajevent/common.hpp"

namespace trajevent {

using nlohmann::json;

void save_params(const autodiff::ParameterSet& params,
                 const std::filesystem::path& file) {
  json root;
  root["format"] = kCheckpointFormat;
  json list = json::array();
  for (const auto& p : params) {
    json entry;
    entry["name"] = p.name;
    entry["shape"] = p.value.shape();
    entry["data"] = std::vector<double>(p.value.data(),
                                        p.value.data() + p.value.numel());
    list.push_back(std::move(entry));
  }
  root["params"] = std::move(list);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + file.string());
  out << root.dump() << '\n';
}

autodiff::ParameterSet load_params(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open checkpoint " + file.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + file.string() + ": " + e.what());
  }
  if (!root.contains("format") || root["format"] != kCheckpointFormat)
    throw DataError("checkpoint " + file.string() +
                    ": missing or unsupported format tag");
  autodiff::ParameterSet params;
  for (const auto& entry : root.at("params")) {
    autodiff::Parameter p;
    p.name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<size_t>>();
    auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != Tensor::numel_of(shape))
      throw DataError("checkpoint " + file.string() + ": parameter '" +
                      p.name + "' data does not match its shape");
    p.value = Tensor(shape, std::move(data));
    params.push_back(std::move(p));
  }
  return params;
}

}  // namespace trajevent
