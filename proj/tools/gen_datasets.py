#!/usr/bin/env python3
"""Regenerates the sample datasources under data/datasources."""
import datetime as dt
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "datasources"


def superstore(rng):
    regions = ["Central", "East", "South", "West"]
    categories = {
        "Furniture": (40, 900),
        "Office Supplies": (3, 120),
        "Technology": (60, 1500),
    }
    segments = ["Consumer", "Corporate", "Home Office"]
    cols = {k: [] for k in ["Order ID", "Order Date", "Ship Date", "Region", "Category",
                            "Segment", "Sales", "Profit", "Quantity"]}
    start = dt.date(2022, 1, 3)
    for i in range(60):
        order = start + dt.timedelta(days=rng.randrange(0, 720))
        cat = rng.choice(list(categories))
        lo, hi = categories[cat]
        qty = rng.randint(1, 9)
        sales = round(rng.uniform(lo, hi) * qty / 3, 2)
        margin = rng.uniform(-0.25, 0.35)
        cols["Order ID"].append(f"US-{order.year}-{100400 + i * 7}")
        cols["Order Date"].append(order.isoformat())
        cols["Ship Date"].append((order + dt.timedelta(days=rng.randint(1, 6))).isoformat())
        cols["Region"].append(regions[i % 4] if i < 8 else rng.choice(regions))
        cols["Category"].append(cat)
        cols["Segment"].append(rng.choice(segments))
        cols["Sales"].append(sales)
        cols["Profit"].append(round(sales * margin, 2))
        cols["Quantity"].append(qty)
    aliases = {
        "Order ID": ["Order Number"],
        "Region": ["Sales Region", "Region Name"],
        "Category": ["Category Name"],
        "Segment": ["Customer Segment"],
        "Sales": ["Revenue", "Sales Amount"],
        "Profit": ["Earnings"],
        "Quantity": ["Units"],
    }
    types = {"Order ID": "nominal", "Order Date": "temporal", "Ship Date": "temporal",
             "Region": "nominal", "Category": "nominal", "Segment": "nominal",
             "Sales": "quantitative", "Profit": "quantitative", "Quantity": "quantitative"}
    fields = []
    for name, values in cols.items():
        f = {"name": name}
        if name in aliases:
            f["aliases"] = aliases[name]
        f["dataType"] = types[name]
        f["fieldValues"] = values
        fields.append(f)
    return {"title": "Superstore", "fields": fields}


def accounts(rng):
    names = ["Acme Corp", "Blue Harbor", "Cobalt Labs", "Delta Freight", "Evergreen Foods",
             "Fjord Systems", "Granite Works", "Helix Health", "Ion Media", "Juniper Retail",
             "Kestrel Air", "Lumen Energy", "Maple Finance", "Nimbus Cloud", "Orchid Hotels"]
    industries = ["Manufacturing", "Logistics", "Technology", "Healthcare", "Retail", "Finance"]
    industry_of = {n: industries[i % len(industries)] for i, n in enumerate(names)}
    cols = {"Account Name": [], "Industry": [], "Item Quantity": [], "Order Amount": [], "Close Date": []}
    for i in range(45):
        n = names[i % len(names)] if i < 15 else rng.choice(names)
        qty = rng.randint(5, 400)
        cols["Account Name"].append(n)
        cols["Industry"].append(industry_of[n])
        cols["Item Quantity"].append(qty)
        cols["Order Amount"].append(round(qty * rng.uniform(8, 60), 2))
        cols["Close Date"].append((dt.date(2023, 1, 1) + dt.timedelta(days=rng.randrange(0, 365))).isoformat())
    return {
        "title": "Accounts",
        "fields": [
            {"name": "Account Name", "aliases": ["Account", "Customer"], "dataType": "nominal",
             "fieldValues": cols["Account Name"]},
            {"name": "Industry", "dataType": "nominal", "fieldValues": cols["Industry"]},
            {"name": "Item Quantity", "aliases": ["Items", "Quantity"], "dataType": "quantitative",
             "fieldValues": cols["Item Quantity"]},
            {"name": "Order Amount", "aliases": ["Amount"], "dataType": "quantitative",
             "fieldValues": cols["Order Amount"]},
            {"name": "Close Date", "dataType": "temporal", "fieldValues": cols["Close Date"]},
        ],
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, build in [("superstore", superstore), ("accounts", accounts)]:
        doc = build(random.Random(20240611))
        (OUT / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
