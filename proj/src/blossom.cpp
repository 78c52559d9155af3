#include "nearfar/blossom.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace nearfar {

namespace {

// Galil's O(n^3) formulation of Edmonds' blossom algorithm for maximum
// weight matching, with lazy dual adjustment. Vertices 0..n-1, blossom
// slots n..2n-1. Edge endpoints are indexed as 2k / 2k+1 for edge k.
class MaxWeightMatcher {
public:
    MaxWeightMatcher(int n, const std::vector<std::tuple<int, int, double>>& edge_list,
                     bool max_cardinality)
        : nvertex(n), maxcardinality(max_cardinality), edges(edge_list) {
        nedge = static_cast<int>(edges.size());
        maxweight = 0.0;
        for (const auto& [i, j, w] : edges) maxweight = std::max(maxweight, w);
        eps = 1e-9 * std::max(1.0, maxweight);

        endpoint.resize(2 * nedge);
        neighbend.assign(nvertex, {});
        for (int k = 0; k < nedge; ++k) {
            auto [i, j, w] = edges[k];
            endpoint[2 * k] = i;
            endpoint[2 * k + 1] = j;
            neighbend[i].push_back(2 * k + 1);
            neighbend[j].push_back(2 * k);
        }

        mate.assign(nvertex, -1);
        label.assign(2 * nvertex, 0);
        labelend.assign(2 * nvertex, -1);
        inblossom.resize(nvertex);
        for (int v = 0; v < nvertex; ++v) inblossom[v] = v;
        blossomparent.assign(2 * nvertex, -1);
        blossomchilds.assign(2 * nvertex, {});
        blossombase.resize(2 * nvertex);
        for (int v = 0; v < nvertex; ++v) blossombase[v] = v;
        for (int b = nvertex; b < 2 * nvertex; ++b) blossombase[b] = -1;
        blossomendps.assign(2 * nvertex, {});
        bestedge.assign(2 * nvertex, -1);
        blossombestedges.assign(2 * nvertex, {});
        has_bestedges.assign(2 * nvertex, false);
        for (int b = 2 * nvertex - 1; b >= nvertex; --b) unusedblossoms.push_back(b);
        dualvar.assign(2 * nvertex, 0.0);
        for (int v = 0; v < nvertex; ++v) dualvar[v] = maxweight;
        allowedge.assign(nedge, false);
    }

    std::vector<int> solve() {
        for (int t = 0; t < nvertex; ++t) {
            std::fill(label.begin(), label.end(), 0);
            std::fill(bestedge.begin(), bestedge.end(), -1);
            for (int b = nvertex; b < 2 * nvertex; ++b) {
                blossombestedges[b].clear();
                has_bestedges[b] = false;
            }
            std::fill(allowedge.begin(), allowedge.end(), false);
            queue.clear();

            for (int v = 0; v < nvertex; ++v)
                if (mate[v] == -1 && label[inblossom[v]] == 0) assign_label(v, 1, -1);

            bool augmented = false;
            while (true) {
                while (!queue.empty() && !augmented) {
                    int v = queue.back();
                    queue.pop_back();
                    assert(label[inblossom[v]] == 1);
                    for (int p : neighbend[v]) {
                        int k = p / 2;
                        int w = endpoint[p];
                        if (inblossom[v] == inblossom[w]) continue;
                        double kslack = 0.0;
                        if (!allowedge[k]) {
                            kslack = slack(k);
                            if (kslack <= eps) allowedge[k] = true;
                        }
                        if (allowedge[k]) {
                            if (label[inblossom[w]] == 0) {
                                assign_label(w, 2, p ^ 1);
                            } else if (label[inblossom[w]] == 1) {
                                int base = scan_blossom(v, w);
                                if (base >= 0) {
                                    add_blossom(base, k);
                                } else {
                                    augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if (label[w] == 0) {
                                assert(label[inblossom[w]] == 2);
                                label[w] = 2;
                                labelend[w] = p ^ 1;
                            }
                        } else if (label[inblossom[w]] == 1) {
                            int b = inblossom[v];
                            if (bestedge[b] == -1 || kslack < slack(bestedge[b]))
                                bestedge[b] = k;
                        } else if (label[w] == 0) {
                            if (bestedge[w] == -1 || kslack < slack(bestedge[w]))
                                bestedge[w] = k;
                        }
                    }
                }
                if (augmented) break;

                int deltatype = -1;
                double delta = 0.0;
                int deltaedge = -1, deltablossom = -1;
                if (!maxcardinality) {
                    deltatype = 1;
                    delta = *std::min_element(dualvar.begin(), dualvar.begin() + nvertex);
                }
                for (int v = 0; v < nvertex; ++v) {
                    if (label[inblossom[v]] == 0 && bestedge[v] != -1) {
                        double d = slack(bestedge[v]);
                        if (deltatype == -1 || d < delta) {
                            delta = d;
                            deltatype = 2;
                            deltaedge = bestedge[v];
                        }
                    }
                }
                for (int b = 0; b < 2 * nvertex; ++b) {
                    if (blossomparent[b] == -1 && label[b] == 1 && bestedge[b] != -1) {
                        double d = slack(bestedge[b]) / 2.0;
                        if (deltatype == -1 || d < delta) {
                            delta = d;
                            deltatype = 3;
                            deltaedge = bestedge[b];
                        }
                    }
                }
                for (int b = nvertex; b < 2 * nvertex; ++b) {
                    if (blossombase[b] >= 0 && blossomparent[b] == -1 && label[b] == 2 &&
                        (deltatype == -1 || dualvar[b] < delta)) {
                        delta = dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if (deltatype == -1) {
                    // No further dual improvement; maximum cardinality reached.
                    deltatype = 1;
                    delta = std::max(
                        0.0, *std::min_element(dualvar.begin(), dualvar.begin() + nvertex));
                }

                for (int v = 0; v < nvertex; ++v) {
                    if (label[inblossom[v]] == 1)
                        dualvar[v] -= delta;
                    else if (label[inblossom[v]] == 2)
                        dualvar[v] += delta;
                }
                for (int b = nvertex; b < 2 * nvertex; ++b) {
                    if (blossombase[b] >= 0 && blossomparent[b] == -1) {
                        if (label[b] == 1)
                            dualvar[b] += delta;
                        else if (label[b] == 2)
                            dualvar[b] -= delta;
                    }
                }

                if (deltatype == 1) {
                    break;
                } else if (deltatype == 2) {
                    allowedge[deltaedge] = true;
                    int i = std::get<0>(edges[deltaedge]);
                    int j = std::get<1>(edges[deltaedge]);
                    if (label[inblossom[i]] == 0) std::swap(i, j);
                    assert(label[inblossom[i]] == 1);
                    queue.push_back(i);
                } else if (deltatype == 3) {
                    allowedge[deltaedge] = true;
                    queue.push_back(std::get<0>(edges[deltaedge]));
                } else {
                    expand_blossom(deltablossom, false);
                }
            }
            if (!augmented) break;

            for (int b = nvertex; b < 2 * nvertex; ++b) {
                if (blossomparent[b] == -1 && blossombase[b] >= 0 && label[b] == 1 &&
                    std::fabs(dualvar[b]) <= eps)
                    expand_blossom(b, true);
            }
        }

        std::vector<int> result(nvertex, -1);
        for (int v = 0; v < nvertex; ++v)
            if (mate[v] >= 0) result[v] = endpoint[mate[v]];
        return result;
    }

private:
    double slack(int k) const {
        const auto& [i, j, w] = edges[k];
        return dualvar[i] + dualvar[j] - 2.0 * w;
    }

    void blossom_leaves(int b, std::vector<int>& out) const {
        if (b < nvertex) {
            out.push_back(b);
        } else {
            for (int t : blossomchilds[b]) blossom_leaves(t, out);
        }
    }

    void assign_label(int w, int t, int p) {
        int b = inblossom[w];
        assert(label[w] == 0 && label[b] == 0);
        label[w] = label[b] = t;
        labelend[w] = labelend[b] = p;
        bestedge[w] = bestedge[b] = -1;
        if (t == 1) {
            blossom_leaves(b, queue);
        } else if (t == 2) {
            int base = blossombase[b];
            assert(mate[base] >= 0);
            assign_label(endpoint[mate[base]], 1, mate[base] ^ 1);
        }
    }

    // Trace back from v and w; returns the base of the new blossom, or -1
    // when an augmenting path has been found instead.
    int scan_blossom(int v, int w) {
        std::vector<int> path;
        int base = -1;
        while (v != -1 || w != -1) {
            int b = inblossom[v];
            if (label[b] & 4) {
                base = blossombase[b];
                break;
            }
            assert(label[b] == 1);
            path.push_back(b);
            label[b] = 5;
            assert(labelend[b] == mate[blossombase[b]]);
            if (labelend[b] == -1) {
                v = -1;
            } else {
                v = endpoint[labelend[b]];
                b = inblossom[v];
                assert(label[b] == 2);
                assert(labelend[b] >= 0);
                v = endpoint[labelend[b]];
            }
            if (w != -1) std::swap(v, w);
        }
        for (int b : path) label[b] = 1;
        return base;
    }

    void add_blossom(int base, int k) {
        int v = std::get<0>(edges[k]);
        int w = std::get<1>(edges[k]);
        int bb = inblossom[base];
        int bv = inblossom[v];
        int bw = inblossom[w];
        int b = unusedblossoms.back();
        unusedblossoms.pop_back();
        blossombase[b] = base;
        blossomparent[b] = -1;
        blossomparent[bb] = b;

        std::vector<int> path, endps;
        while (bv != bb) {
            blossomparent[bv] = b;
            path.push_back(bv);
            endps.push_back(labelend[bv]);
            assert(label[bv] == 2 ||
                   (label[bv] == 1 && labelend[bv] == mate[blossombase[bv]]));
            assert(labelend[bv] >= 0);
            v = endpoint[labelend[bv]];
            bv = inblossom[v];
        }
        path.push_back(bb);
        std::reverse(path.begin(), path.end());
        std::reverse(endps.begin(), endps.end());
        endps.push_back(2 * k);
        while (bw != bb) {
            blossomparent[bw] = b;
            path.push_back(bw);
            endps.push_back(labelend[bw] ^ 1);
            assert(label[bw] == 2 ||
                   (label[bw] == 1 && labelend[bw] == mate[blossombase[bw]]));
            assert(labelend[bw] >= 0);
            w = endpoint[labelend[bw]];
            bw = inblossom[w];
        }
        blossomchilds[b] = std::move(path);
        blossomendps[b] = std::move(endps);
        assert(label[bb] == 1);
        label[b] = 1;
        labelend[b] = labelend[bb];
        dualvar[b] = 0.0;

        std::vector<int> leaves;
        blossom_leaves(b, leaves);
        for (int lv : leaves) {
            if (label[inblossom[lv]] == 2) queue.push_back(lv);
            inblossom[lv] = b;
        }

        // Recompute best edges out of the new blossom.
        std::vector<int> bestedgeto(2 * nvertex, -1);
        for (int child : blossomchilds[b]) {
            std::vector<std::vector<int>> nblists;
            if (!has_bestedges[child]) {
                std::vector<int> child_leaves;
                blossom_leaves(child, child_leaves);
                for (int lv : child_leaves) {
                    nblists.emplace_back();
                    for (int p : neighbend[lv]) nblists.back().push_back(p / 2);
                }
            } else {
                nblists.push_back(blossombestedges[child]);
            }
            for (const auto& nblist : nblists) {
                for (int ek : nblist) {
                    int i = std::get<0>(edges[ek]);
                    int j = std::get<1>(edges[ek]);
                    if (inblossom[j] == b) std::swap(i, j);
                    int bj = inblossom[j];
                    if (bj != b && label[bj] == 1 &&
                        (bestedgeto[bj] == -1 || slack(ek) < slack(bestedgeto[bj])))
                        bestedgeto[bj] = ek;
                }
            }
            blossombestedges[child].clear();
            has_bestedges[child] = false;
            bestedge[child] = -1;
        }
        blossombestedges[b].clear();
        for (int ek : bestedgeto)
            if (ek != -1) blossombestedges[b].push_back(ek);
        has_bestedges[b] = true;
        bestedge[b] = -1;
        for (int ek : blossombestedges[b])
            if (bestedge[b] == -1 || slack(ek) < slack(bestedge[b])) bestedge[b] = ek;
    }

    void expand_blossom(int b, bool endstage) {
        for (int s : blossomchilds[b]) {
            blossomparent[s] = -1;
            if (s < nvertex) {
                inblossom[s] = s;
            } else if (endstage && std::fabs(dualvar[s]) <= eps) {
                expand_blossom(s, endstage);
            } else {
                std::vector<int> leaves;
                blossom_leaves(s, leaves);
                for (int lv : leaves) inblossom[lv] = s;
            }
        }
        if (!endstage && label[b] == 2) {
            assert(labelend[b] >= 0);
            int entrychild = inblossom[endpoint[labelend[b] ^ 1]];
            int j = 0;
            for (std::size_t idx = 0; idx < blossomchilds[b].size(); ++idx)
                if (blossomchilds[b][idx] == entrychild) j = static_cast<int>(idx);
            int jstep, endptrick;
            int nchilds = static_cast<int>(blossomchilds[b].size());
            if (j & 1) {
                j -= nchilds;
                jstep = 1;
                endptrick = 0;
            } else {
                jstep = -1;
                endptrick = 1;
            }
            auto child_at = [&](int idx) {
                return blossomchilds[b][(idx % nchilds + nchilds) % nchilds];
            };
            auto endp_at = [&](int idx) {
                return blossomendps[b][(idx % nchilds + nchilds) % nchilds];
            };
            int p = labelend[b];
            while (j != 0) {
                label[endpoint[p ^ 1]] = 0;
                label[endpoint[endp_at(j - endptrick) ^ endptrick ^ 1]] = 0;
                assign_label(endpoint[p ^ 1], 2, p);
                allowedge[endp_at(j - endptrick) / 2] = true;
                j += jstep;
                p = endp_at(j - endptrick) ^ endptrick;
                allowedge[p / 2] = true;
                j += jstep;
            }
            int bv = child_at(j);
            label[endpoint[p ^ 1]] = 2;
            label[bv] = 2;
            labelend[endpoint[p ^ 1]] = p;
            labelend[bv] = p;
            bestedge[bv] = -1;
            j += jstep;
            while (child_at(j) != entrychild) {
                bv = child_at(j);
                if (label[bv] == 1) {
                    j += jstep;
                    continue;
                }
                std::vector<int> leaves;
                blossom_leaves(bv, leaves);
                int lv = -1;
                for (int cand : leaves) {
                    lv = cand;
                    if (label[cand] != 0) break;
                }
                if (lv != -1 && label[lv] != 0) {
                    assert(label[lv] == 2);
                    assert(inblossom[lv] == bv);
                    label[lv] = 0;
                    label[endpoint[mate[blossombase[bv]]]] = 0;
                    assign_label(lv, 2, labelend[lv]);
                }
                j += jstep;
            }
        }
        label[b] = -1;
        labelend[b] = -1;
        blossomchilds[b].clear();
        blossomendps[b].clear();
        blossombase[b] = -1;
        blossombestedges[b].clear();
        has_bestedges[b] = false;
        bestedge[b] = -1;
        unusedblossoms.push_back(b);
    }

    void augment_blossom(int b, int v) {
        int t = v;
        while (blossomparent[t] != b) t = blossomparent[t];
        if (t >= nvertex) augment_blossom(t, v);

        int i = 0;
        int nchilds = static_cast<int>(blossomchilds[b].size());
        for (int idx = 0; idx < nchilds; ++idx)
            if (blossomchilds[b][idx] == t) i = idx;
        int j = i;
        int jstep, endptrick;
        if (i & 1) {
            j -= nchilds;
            jstep = 1;
            endptrick = 0;
        } else {
            jstep = -1;
            endptrick = 1;
        }
        auto child_at = [&](int idx) {
            return blossomchilds[b][(idx % nchilds + nchilds) % nchilds];
        };
        auto endp_at = [&](int idx) {
            return blossomendps[b][(idx % nchilds + nchilds) % nchilds];
        };
        while (j != 0) {
            j += jstep;
            t = child_at(j);
            int p = endp_at(j - endptrick) ^ endptrick;
            if (t >= nvertex) augment_blossom(t, endpoint[p]);
            j += jstep;
            t = child_at(j);
            if (t >= nvertex) augment_blossom(t, endpoint[p ^ 1]);
            mate[endpoint[p]] = p ^ 1;
            mate[endpoint[p ^ 1]] = p;
        }
        std::rotate(blossomchilds[b].begin(), blossomchilds[b].begin() + i,
                    blossomchilds[b].end());
        std::rotate(blossomendps[b].begin(), blossomendps[b].begin() + i,
                    blossomendps[b].end());
        blossombase[b] = blossombase[blossomchilds[b][0]];
        assert(blossombase[b] == v);
    }

    void augment_matching(int k) {
        int v = std::get<0>(edges[k]);
        int w = std::get<1>(edges[k]);
        const std::pair<int, int> starts[2] = {{v, 2 * k + 1}, {w, 2 * k}};
        for (auto [s, p] : starts) {
            while (true) {
                int bs = inblossom[s];
                assert(label[bs] == 1);
                assert(labelend[bs] == mate[blossombase[bs]]);
                if (bs >= nvertex) augment_blossom(bs, s);
                mate[s] = p;
                if (labelend[bs] == -1) break;
                int t = endpoint[labelend[bs]];
                int bt = inblossom[t];
                assert(label[bt] == 2);
                assert(labelend[bt] >= 0);
                s = endpoint[labelend[bt]];
                int jv = endpoint[labelend[bt] ^ 1];
                assert(blossombase[bt] == t);
                if (bt >= nvertex) augment_blossom(bt, jv);
                mate[jv] = labelend[bt];
                p = labelend[bt] ^ 1;
            }
        }
    }

    int nvertex;
    int nedge;
    bool maxcardinality;
    double maxweight;
    double eps;
    std::vector<std::tuple<int, int, double>> edges;
    std::vector<int> endpoint;
    std::vector<std::vector<int>> neighbend;
    std::vector<int> mate;
    std::vector<int> label;
    std::vector<int> labelend;
    std::vector<int> inblossom;
    std::vector<int> blossomparent;
    std::vector<std::vector<int>> blossomchilds;
    std::vector<int> blossombase;
    std::vector<std::vector<int>> blossomendps;
    std::vector<int> bestedge;
    std::vector<std::vector<int>> blossombestedges;
    std::vector<char> has_bestedges;
    std::vector<int> unusedblossoms;
    std::vector<double> dualvar;
    std::vector<char> allowedge;
    std::vector<int> queue;
};

}  // namespace

std::vector<int> max_weight_matching(
    int num_vertices, const std::vector<std::tuple<int, int, double>>& edges,
    bool max_cardinality) {
    if (num_vertices == 0 || edges.empty()) return std::vector<int>(num_vertices, -1);
    MaxWeightMatcher m(num_vertices, edges, max_cardinality);
    return m.solve();
}

std::vector<int> min_cost_perfect_matching(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    if (n % 2 != 0) throw std::invalid_argument("perfect matching needs an even vertex count");
    if (n == 0) return {};
    double cmax = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) cmax = std::max(cmax, cost[i][j]);
    // Max-cardinality max-weight matching on (cmax - cost) is a minimum-cost
    // perfect matching on the complete graph.
    std::vector<std::tuple<int, int, double>> edges;
    edges.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j, cmax - cost[i][j]);
    auto mate = max_weight_matching(n, edges, true);
    for (int v = 0; v < n; ++v)
        if (mate[v] < 0) throw std::logic_error("matching is not perfect");
    return mate;
}

}  // namespace nearfar
