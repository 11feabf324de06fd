// SPDX-License-Identifier: Apache-2.0
#include "espo/train/metrics.hpp"

#include <cstdio>

namespace espo::train {

JsonlWriter::JsonlWriter(std::string path)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp"), out_(tmp_path_, std::ios::trunc) {
    if (!out_) throw ConfigError("metrics: cannot open for writing: " + tmp_path_);
}

JsonlWriter::~JsonlWriter() {
    if (!finalized_) {
        out_.close();
        std::remove(tmp_path_.c_str());
    }
}

void JsonlWriter::write_line(const std::string& line) {
    if (finalized_) throw ConsistencyError("metrics: write after finalize");
    out_ << line << '\n';
    out_.flush();
    lines_.push_back(line);
}

void JsonlWriter::finalize() {
    if (finalized_) return;
    out_.close();
    if (std::rename(tmp_path_.c_str(), path_.c_str()) != 0) {
        throw ConfigError("metrics: rename failed: " + path_);
    }
    finalized_ = true;
}

std::vector<std::string> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("metrics: cannot open: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

}  // namespace espo::train
