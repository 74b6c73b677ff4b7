#!/usr/bin/env python3
# Copyright 2026 The Resilitest Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Generates the reference topology, its recording workload and the manual
variable registry for its signature-token interfaces.

Output is a pure function of --seed.
"""

import argparse
import os
import random

SERVICES = [
    "orders", "payments", "inventory", "shipping", "geo", "catalog", "pricing", "users",
    "cart", "billing", "ledger", "promo", "reviews", "search", "notify", "media",
]
VERBS = [
    "create", "get", "update", "delete", "list", "validate", "reserve", "cancel", "confirm",
    "sync", "export", "refresh", "lookup", "apply", "archive", "approve", "audit", "check",
    "compute", "merge", "split", "publish", "resolve", "rank", "tag",
]
NOUNS = [
    "order", "item", "address", "quote", "profile", "token", "batch", "record", "entry",
    "slot", "label", "rate", "offer", "note", "status", "summary", "route", "asset",
    "session", "report", "bundle", "policy", "score", "window",
]
READ_VERBS = {"get", "list", "lookup", "check", "rank", "search"}

BUG_FRAMEWORKS = {
    ("Database", "jdbc-tx"), ("Database", "legacy-orm"), ("Database", "batch-sql"),
    ("Cache", "legacy-kv"), ("Cache", "memo-kv"), ("MQ", "kafka-async"), ("MQ", "pulsar-async"),
}
COMPONENTS = sorted({("Database", "sqlclient"), ("Database", "jdbc"), ("Cache", "kvclient"),
                     ("Cache", "redisclient"), ("MQ", "mqclient")} | BUG_FRAMEWORKS)

FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3


def fnv1a(data):
    h = FNV_OFFSET
    for b in data.encode():
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return "%016x" % h


def interface_id(method, uri):
    tokens = [t for t in uri.split("/")[1:]]
    key = method
    for t in tokens:
        key += "\x1f" + ("<*>" if t.startswith("{") else t)
    return fnv1a(key)


class Iface:
    def __init__(self, service, method, op, with_id):
        self.service = service
        self.method = method
        self.op = op
        self.uri = "/%s/%s" % (service, op) + ("/{id}" if with_id else "")
        self.steps = []
        self.fields = []
        self.statics = {}
        self.spans = 1
        self.callable = True
        self.writes = False

    def line(self):
        out = "  interface %s %s" % (self.method, self.uri)
        if self.fields:
            out += " fields=" + ",".join(self.fields)
        if self.statics:
            out += " static=" + ",".join("%s:%s" % kv for kv in sorted(self.statics.items()))
        return out


def method_for(verb):
    if verb in READ_VERBS:
        return "GET"
    if verb in ("delete", "cancel", "archive"):
        return "DELETE"
    if verb in ("update", "apply", "merge", "tag"):
        return "PUT"
    return "POST"


def build(seed):
    rng = random.Random(seed)
    per_service = {}
    svc_db = {s: rng.choice(["sqlclient", "sqlclient", "jdbc"]) for s in SERVICES}
    svc_cache = {s: rng.choice(["kvclient", "redisclient"]) for s in SERVICES}
    counts = [19] * 12 + [18] * 4
    rng.shuffle(counts)
    bug_services = SERVICES[:10]

    def new_iface(svc, used_ops, with_id=None):
        while True:
            verb, noun = rng.choice(VERBS), rng.choice(NOUNS)
            op = "%s-%s" % (verb, noun)
            if op not in used_ops:
                used_ops.add(op)
                break
        if with_id is None:
            with_id = rng.random() < 0.8
        it = Iface(svc, method_for(verb), op, with_id)
        r = rng.random()
        if r < 0.75:
            it.fields = ["session", "ts", "idem"]
        elif r < 0.85:
            it.fields = ["session"]
        elif r < 0.92:
            it.fields = ["ts"]
        if rng.random() < 0.6:
            it.statics["domain_id"] = svc + "-domain"
        return it

    def platform_step(svc, it, table_idx):
        comp = rng.choices(["Database", "Cache", "MQ"], [45, 35, 20])[0]
        if comp == "Database":
            method = rng.choice(["select", "query", "select", "update", "insert"])
            step = "step Database %s %s res=%s_t%d" % (svc_db[svc], method, svc, table_idx % 4)
        elif comp == "Cache":
            method = rng.choice(["get", "get", "set", "delete"])
            step = "step Cache %s %s res=%s_c%d" % (svc_cache[svc], method, svc, table_idx % 3)
        else:
            method = rng.choice(["publish", "send"])
            step = "step MQ mqclient %s res=%s-events" % (method, svc)
        write = method in ("update", "insert", "set", "delete", "publish", "send")
        if write:
            it.writes = True
        elif rng.random() < 0.4:
            step += " on_error=catch_and_degrade"
        if not write and rng.random() < 0.15:
            step += " retries=1"
        return step

    ifaces_by_service = {}
    for si in range(len(SERVICES) - 1, -1, -1):
        svc = SERVICES[si]
        used_ops = set()
        n = counts[si] - (1 if svc in bug_services else 0)
        lst = []
        callees = [c for j in range(si + 1, len(SERVICES)) for c in ifaces_by_service[SERVICES[j]]
                   if c.callable and c.spans <= 7]
        for k in range(n):
            it = new_iface(svc, used_ops)
            steps = []
            for t in range(rng.randint(1, 4)):
                steps.append(platform_step(svc, it, t + k))
            ncalls = rng.choices([0, 1, 2], [40, 40, 20])[0] if callees else 0
            chosen = rng.sample(callees, min(ncalls, len(callees)))
            call_steps = []
            for c in chosen:
                comp, fw, m = rng.choice([("RPC", "grpcclient", "invoke"), ("HTTP", "httpclient", "call")])
                st = "step %s %s %s to=%s:%s:%s" % (comp, fw, m, c.service, c.method, c.uri)
                if rng.random() < 0.3:
                    st += " on_error=catch_and_degrade"
                call_steps.append(st)
                it.spans += c.spans
            # Interleave calls among platform steps.
            for st in call_steps:
                steps.insert(rng.randint(0, len(steps)), st)
            # Producer-consumer: an earlier call feeds a later call.
            calls_at = [i for i, s in enumerate(steps) if s.startswith("step RPC") or s.startswith("step HTTP")]
            if len(calls_at) >= 2 and rng.random() < 0.7:
                steps[calls_at[0]] += " produces=tok%d" % k
                steps[calls_at[1]] += " uses=tok%d" % k
            # Dual write: database update mirrored into the cache.
            if rng.random() < 0.15:
                table = "%s_t%d" % (svc, k % 4)
                steps.append("step Database %s update res=%s" % (svc_db[svc], table))
                steps.append("step Cache %s set res=%s_m%d mirror=%s" % (svc_cache[svc], svc, k % 4, table))
                it.writes = True
            it.steps = steps
            it.spans += len(steps)
            lst.append(it)
        ifaces_by_service[svc] = lst
        per_service[svc] = lst

    # Seeded bugs, one dedicated interface each.
    leaves = {s: [i for i in per_service[s] if i.callable and i.spans <= 5] for s in SERVICES}

    def leaf_after(si):
        pool = [i for j in range(si + 1, len(SERVICES)) for i in leaves[SERVICES[j]]]
        return rng.choice(pool)

    def read_step(svc, k):
        return "step Database %s select res=%s_t%d" % (svc_db[svc], svc, k % 4)

    bug_specs = [
        ("missing_timeout", lambda svc, si: [
            read_step(svc, 1),
            "step HTTP legacy-http call to=%s timeout=none bug=missing_timeout" % target(leaf_after(si)),
        ]),
        ("missing_timeout", lambda svc, si: [
            "step RPC thrift-rpc invoke to=%s timeout=none bug=missing_timeout" % target(leaf_after(si)),
            "step Cache %s get res=%s_c0" % (svc_cache[svc], svc),
        ]),
        ("fire_and_forget", lambda svc, si: [
            "step Database %s update res=%s_t2" % (svc_db[svc], svc),
            "step MQ kafka-async publish res=%s-audit async on_error=ignore bug=fire_and_forget" % svc,
        ]),
        ("fire_and_forget", lambda svc, si: [
            read_step(svc, 3),
            "step MQ pulsar-async send res=%s-notices async on_error=ignore bug=fire_and_forget" % svc,
        ]),
        ("no_rollback", lambda svc, si: [
            read_step(svc, 0),
            "step Database jdbc-tx update res=%s_t1 bug=no_rollback" % svc,
        ]),
        ("no_rollback", lambda svc, si: [
            "step Cache %s get res=%s_c1" % (svc_cache[svc], svc),
            "step Database jdbc-tx insert res=%s_t3 bug=no_rollback" % svc,
        ]),
        ("no_retry", lambda svc, si: [
            "step Cache legacy-kv get res=%s_c2 bug=no_retry" % svc,
            read_step(svc, 2),
        ]),
        ("no_retry", lambda svc, si: [
            "step Database legacy-orm select res=%s_t0 bug=no_retry" % svc,
        ]),
        ("swallow_then_succeed", lambda svc, si: [
            "step Database %s update res=%s_t1" % (svc_db[svc], svc),
            "step Cache memo-kv set res=%s_m1 mirror=%s_t1 bug=swallow_then_succeed" % (svc, svc),
        ]),
        ("swallow_then_succeed", lambda svc, si: [
            read_step(svc, 2),
            "step Database batch-sql insert res=%s_t2 bug=swallow_then_succeed" % svc,
        ]),
    ]

    def target(c):
        return "%s:%s:%s" % (c.service, c.method, c.uri)

    order = list(range(10))
    rng.shuffle(order)
    for bi, si_name in zip(order, bug_services):
        si = SERVICES.index(si_name)
        used = {i.op for i in per_service[si_name]}
        it = new_iface(si_name, used, with_id=True)
        it.fields = ["session", "ts", "idem"]
        it.callable = False
        it.steps = bug_specs[bi][1](si_name, si)
        per_service[si_name].append(it)

    # Signature-token interfaces.
    plain = [i for s in SERVICES for i in per_service[s] if i.callable and "ts" in i.fields]
    signed = rng.sample(plain, 5)
    for it in signed:
        it.fields = it.fields + ["sign"]
    return per_service, signed


def write(out_dir, seed):
    per_service, signed = build(seed)
    rng = random.Random(seed * 7919 + 1)
    lines = ["# Reference topology (generated by scripts/gen_reference.py --seed %d)." % seed,
             "topology reference seed=%d" % seed]
    for comp, fw in COMPONENTS:
        lines.append("component %s %s" % (comp, fw))
    all_ifaces = []
    for svc in SERVICES:
        lines.append("service %s workers=4" % svc)
        for it in per_service[svc]:
            lines.append(it.line())
            for st in it.steps:
                lines.append("    " + st)
            lines.append("  end")
            all_ifaces.append(it)
        lines.append("end")
    with open(os.path.join(out_dir, "reference_topology.txt"), "w") as f:
        f.write("\n".join(lines) + "\n")

    requests = []
    for it in all_ifaces:
        for _ in range(rng.randint(3, 6)):
            t = rng.randrange(0, 600_000)
            uri = it.uri.replace("{id}", str(rng.randint(1000, 999999)))
            fields = []
            if "session" in it.fields:
                fields.append("session_id=@fresh")
            if "ts" in it.fields:
                fields.append("ts=@now")
            if "idem" in it.fields:
                fields.append("idem_key=@fresh")
            if "sign" in it.fields:
                fields.append("auth.signature=@sign")
            for k, v in sorted(it.statics.items()):
                fields.append("%s=%s" % (k, v))
            if rng.random() < 0.5:
                fields.append("qty=%d" % rng.randint(1, 9))
            requests.append((t, it.method, uri, fields))
    requests.sort(key=lambda r: r[0])
    with open(os.path.join(out_dir, "workload.txt"), "w") as f:
        f.write("# <virtual_ms> <METHOD> <uri> [key=value ...]\n")
        for t, m, uri, fields in requests:
            f.write(" ".join([str(t), m, uri] + fields) + "\n")

    with open(os.path.join(out_dir, "registry.txt"), "w") as f:
        f.write("# <interface_id> <req|resp> <key-path> <kind> # note\n")
        for it in sorted(signed, key=lambda i: interface_id(i.method, i.uri)):
            f.write("%s req auth.signature opaque_copy # %s %s: gateway signature, resolved via POST /auth/sign\n"
                    % (interface_id(it.method, it.uri), it.method, it.uri))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20260)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "assets"))
    args = ap.parse_args()
    write(args.out, args.seed)


if __name__ == "__main__":
    main()
