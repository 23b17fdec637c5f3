// Declaration-only stand-in for the runtime I/O helpers.
#pragma once

#include <string>
#include <vector>

namespace gnnb {

struct GraphData {
    int num_nodes = 0;
    int num_edges = 0;
    int node_dim = 0;
    int edge_dim = 0;
    std::vector<int> edges;
    std::vector<float> node_features;
    std::vector<float> edge_features;
};

GraphData read_graph(const std::string& path);
std::string indexed_path(const std::string& prefix, int index, const char* suffix);
std::vector<double> read_f64(const std::string& path);
void write_metric(const char* path, double value);

class OutputWriter {
public:
    explicit OutputWriter(const char* path);
    template <typename T> void write(T value);
};

}  // namespace gnnb
