#!/usr/bin/env python3
"""Writes the bundled form dataset under data/apps/<app>/<layout>/ and the
adversarial mapping cases under data/adversarial/<case>/.

Every layout directory gets fixture.json, page<k>.html, tasks.csv,
truth.csv, mapping_truth.csv, demo.json and site.toml. Output is
deterministic; rerunning overwrites the files with identical bytes.
"""

import argparse
import csv
import html
import io
import json
import random
from pathlib import Path

CHAR_W = 8
TEXT_H = 16
WIDTH = 1280

COUNTRIES = ["Argentina", "Australia", "Brazil", "Canada", "Chile", "Denmark", "Egypt", "Finland",
             "France", "Germany", "India", "Japan", "Kenya", "Mexico", "Norway", "Peru", "Portugal",
             "Spain", "Sweden", "Vietnam"]
INSURERS = ["Atlas Health", "BlueRiver", "CareFirst", "Evergreen", "Harbor Mutual", "Keystone",
            "Meridian", "Northstar", "Pinnacle", "Sunrise", "Trident", "Unity Care"]
BLOOD = ["A Positive", "A Negative", "B Positive", "B Negative", "AB Positive", "AB Negative",
         "O Positive", "O Negative"]
INDUSTRIES = ["Agriculture", "Automotive", "Banking", "Construction", "Education", "Energy",
              "Healthcare", "Hospitality", "Insurance", "Logistics", "Manufacturing", "Media",
              "Retail", "Software", "Telecom"]
BUDGETS = ["Under 10k", "10k to 50k", "50k to 100k", "100k to 500k", "500k to 1M", "Over 1M"]
CATEGORIES = ["Appliances", "Books", "Clothing", "Furniture", "Garden", "Groceries", "Phones",
              "Shoes", "Toys", "Watches"]

FIRST = ["Alice", "Bruno", "Chen", "Dana", "Emeka", "Farah", "Gustav", "Hana", "Ivan", "Jia",
         "Kofi", "Lena", "Mateo", "Nora", "Omar", "Priya", "Quinn", "Rosa", "Sanjay", "Tomas"]
LAST = ["Abbott", "Baker", "Castillo", "Dubois", "Eriksen", "Fischer", "Garcia", "Hughes",
        "Ivanova", "Jensen", "Kaplan", "Larsen", "Moreau", "Nakamura", "Okafor", "Patel"]
STREETS = ["Maple Street", "Harbor Road", "Kings Avenue", "Mill Lane", "Park Row", "River Drive"]
CITIES = ["Springfield", "Riverton", "Lakeside", "Hillcrest", "Fairview", "Brookhaven"]


def w(kind, label, dom_id, required=False, hint=None, options=None, calendar=None,
      placeholder=None, wrap=False, value=None):
    return dict(kind=kind, label=label, dom_id=dom_id, required=required, hint=hint,
                options=options or [], calendar=calendar, placeholder=placeholder, wrap=wrap,
                value=value)


def cal(typing=False, month=6, year=2023, week_start=0):
    return dict(typing_allowed=typing, initial_month=month, initial_year=year,
                week_start=week_start)


# ---- value generators, one per widget, each taking an rng ----

def person(rng):
    return f"{rng.choice(FIRST)} {rng.choice(LAST)}"


def email(rng):
    return f"{rng.choice(FIRST).lower()}.{rng.choice(LAST).lower()}@example.org"


def phone(rng):
    return "".join(str(rng.randint(0, 9)) for _ in range(10))


def date_between(rng, y0, y1):
    y = rng.randint(y0, y1)
    m = rng.randint(1, 12)
    d = rng.randint(1, 28 if m == 2 else 30)
    return f"{y:04d}-{m:02d}-{d:02d}"


def address(rng):
    return f"{rng.randint(1, 999)} {rng.choice(STREETS)} {rng.choice(CITIES)}"


def subset(rng, options):
    k = rng.randint(1, min(2, len(options)))
    picked = sorted(rng.sample(range(len(options)), k))
    return ";".join(options[i] for i in picked)


APPS = {
    "conference": dict(
        name="Conference Registration",
        strategy="grid",
        pages=[
            dict(title="Attendee Details", submit="Next", kind="NextPage", widgets=[
                w("TextInput", "First Name", "first_name", True, value=lambda r: r.choice(FIRST)),
                w("TextInput", "Last Name", "last_name", True, value=lambda r: r.choice(LAST)),
                w("TextInput", "Email", "email", True, hint="e.g. name@example.org", value=email),
                w("TextInput", "Affiliation", "affiliation",
                  value=lambda r: r.choice(["Northfield University", "Acme Labs", "City College"])),
                w("Dropdown", "Country", "country", True, options=COUNTRIES,
                  value=lambda r: r.choice(COUNTRIES)),
            ]),
            dict(title="Session Preferences", submit="Register", kind="FinalSubmit",
                 success="Registration submitted successfully", widgets=[
                     w("DatePicker", "Arrival Date", "arrival_date", True, calendar=cal(False, 6, 2023),
                       value=lambda r: date_between(r, 2023, 2024)),
                     w("Radio", "Ticket Type", "ticket_type", True,
                       options=["Student", "Regular", "Speaker"],
                       value=lambda r: r.choice(["Student", "Regular", "Speaker"])),
                     w("Checkbox", "Workshops", "workshops", options=["Vision", "Language", "Robotics"],
                       value=lambda r: subset(r, ["Vision", "Language", "Robotics"])),
                     w("TextArea", "Dietary Needs", "dietary_needs",
                       value=lambda r: r.choice(["Vegetarian meals", "No peanuts", "Gluten free"])),
                 ]),
        ]),
    "patient": dict(
        name="Patient Registration",
        strategy="rule",
        pages=[
            dict(title="Patient Registration", submit="Register Patient", kind="FinalSubmit",
                 success="Patient registered successfully", widgets=[
                     w("TextInput", "Full Name", "full_name", True, value=person),
                     w("DatePicker", "Date of Birth", "dob", True, hint="Pick from the calendar",
                       calendar=cal(False, 6, 2023), value=lambda r: date_between(r, 1970, 2005)),
                     w("Radio", "Gender", "gender", True, options=["Female", "Male", "Other"],
                       value=lambda r: r.choice(["Female", "Male", "Other"])),
                     w("TextInput", "Phone Number", "phone", True, hint="10 digits, no spaces",
                       value=phone),
                     w("TextInput", "Email Address", "email", value=email),
                     w("Dropdown", "Blood Group", "blood_group", options=BLOOD,
                       value=lambda r: r.choice(BLOOD)),
                     w("Dropdown", "Insurance Provider", "insurer", True, options=INSURERS,
                       value=lambda r: r.choice(INSURERS)),
                     w("Checkbox", "Symptoms", "symptoms", options=["Fever", "Cough", "Headache", "Fatigue"],
                       value=lambda r: subset(r, ["Fever", "Cough", "Headache", "Fatigue"])),
                     w("TextArea", "Home Address", "home_address", value=address),
                 ]),
        ]),
    "sales_lead": dict(
        name="Sales Lead",
        strategy="demo",
        pages=[
            dict(title="New Sales Lead", submit="Save Lead", kind="FinalSubmit",
                 success="Lead submitted successfully", widgets=[
                     w("TextInput", "Company Name", "company", True,
                       value=lambda r: r.choice(["Globex", "Initech", "Umbrella Trading", "Stark Supply"])),
                     w("TextInput", "Contact Person", "contact", True, value=person),
                     w("TextInput", "Work Email", "work_email", True, value=email),
                     w("Dropdown", "Industry", "industry", True, options=INDUSTRIES,
                       value=lambda r: r.choice(INDUSTRIES)),
                     w("Radio", "Lead Source", "lead_source", options=["Website", "Referral", "Event"],
                       value=lambda r: r.choice(["Website", "Referral", "Event"])),
                     w("DatePicker", "Follow-up Date", "followup", hint="YYYY-MM-DD",
                       calendar=cal(True, 6, 2023), value=lambda r: date_between(r, 2023, 2025)),
                     w("Dropdown", "Budget Range", "budget", options=BUDGETS,
                       value=lambda r: r.choice(BUDGETS)),
                     w("TextArea", "Notes", "notes",
                       value=lambda r: r.choice(["Asked for a demo", "Call after budget review",
                                                 "Met at trade show"])),
                 ]),
        ]),
    "complaint": dict(
        name="Customer Complaint",
        strategy="rule",
        pages=[
            dict(title="Customer Complaint Form", submit="File Complaint", kind="FinalSubmit",
                 success="Complaint registered successfully", widgets=[
                     w("TextInput", "Customer Name", "customer", True, value=person),
                     w("TextInput", "Order Number", "order_no", True, hint="Format ORD-12345",
                       value=lambda r: f"ORD-{r.randint(10000, 99999)}"),
                     w("DatePicker", "Purchase Date", "purchase_date", True,
                       calendar=cal(False, 6, 2023, week_start=1),
                       value=lambda r: date_between(r, 2021, 2023)),
                     w("Dropdown", "Product Category", "category", True, options=CATEGORIES, wrap=True,
                       value=lambda r: r.choice(CATEGORIES)),
                     w("Radio", "Complaint Type", "complaint_type",
                       options=["Damaged", "Late Delivery", "Wrong Item"], required=True,
                       value=lambda r: r.choice(["Damaged", "Late Delivery", "Wrong Item"])),
                     w("Checkbox", "Preferred Contact", "contact_pref", options=["Email", "Phone", "Letter"],
                       value=lambda r: subset(r, ["Email", "Phone", "Letter"])),
                     w("TextArea", "Description", "description",
                       value=lambda r: r.choice(["Box arrived crushed", "Item never arrived",
                                                 "Received the wrong size"])),
                 ]),
        ]),
    "passport": dict(
        name="Passport Application",
        strategy="grid",
        pages=[
            dict(title="Passport Application", submit="Submit Application", kind="FinalSubmit",
                 success="Application submitted successfully", widgets=[
                     w("TextInput", "Surname", "surname", True, value=lambda r: r.choice(LAST)),
                     w("TextInput", "Given Names", "given_names", True, value=lambda r: r.choice(FIRST)),
                     w("DatePicker", "Date of Birth", "birth_date", True, calendar=cal(False, 1, 2024),
                       value=lambda r: date_between(r, 1975, 2010)),
                     w("TextInput", "Place of Birth", "birth_place", True, value=lambda r: r.choice(CITIES)),
                     w("Radio", "Sex", "sex", True, options=["Female", "Male", "Unspecified"],
                       value=lambda r: r.choice(["Female", "Male", "Unspecified"])),
                     w("Dropdown", "Nationality", "nationality", True, options=COUNTRIES,
                       value=lambda r: r.choice(COUNTRIES)),
                     w("Radio", "Passport Type", "passport_type", options=["Regular", "Official", "Diplomatic"],
                       value=lambda r: r.choice(["Regular", "Official", "Diplomatic"])),
                     w("Checkbox", "Delivery Options", "delivery", options=["Express", "Courier"],
                       value=lambda r: subset(r, ["Express", "Courier"])),
                     w("TextArea", "Mailing Address", "mailing_address", value=address),
                 ]),
        ]),
}

# Task 5 of the complaint app leaves out a required field on purpose; its
# expected outcome is the missing-field error.
OMIT = {("complaint", 4): "Order Number"}


# ---- geometry ----

def text_w(text):
    return max(CHAR_W, CHAR_W * len(text))


def edit_size(widget):
    kind = widget["kind"]
    if kind == "TextArea":
        return 480, 64
    if kind == "DatePicker":
        return 200, 28
    if kind in ("Radio", "Checkbox"):
        width = 30 + sum(text_w(o) + 56 for o in widget["options"])
        return width, 28
    return 320, 28


def place(widget, ex, ey):
    """Edit box plus option boxes for choice widgets."""
    ew, eh = edit_size(widget)
    spec = {"edit": [ex, ey, ew, eh]}
    if widget["kind"] in ("Radio", "Checkbox"):
        x = ex + 30
        opts = []
        for o in widget["options"]:
            opts.append({"text": o, "box": [x, ey + 6, text_w(o), TEXT_H]})
            x += text_w(o) + 56
        spec["options"] = opts
    elif widget["kind"] == "Dropdown":
        spec["options"] = list(widget["options"])
    return spec


def layout_page(page, style):
    """Returns (elements, submit box, bottom)."""
    elements = []
    y = 120
    bottom = y
    for wd in page["widgets"]:
        ew, eh = edit_size(wd)
        if style == "top":
            label_box = [80, y, text_w(wd["label"]), TEXT_H]
            spec = place(wd, 80, y + 20)
            edit = spec["edit"]
            hint_box = None
            if wd["hint"]:
                hint_box = [80, edit[1] + edit[3] + 4, text_w(wd["hint"]), TEXT_H]
            last = hint_box[1] + hint_box[3] if hint_box else edit[1] + edit[3]
            y = last + 48
        else:
            spec = place(wd, 300, y)
            edit = spec["edit"]
            lw = text_w(wd["label"])
            label_box = [290 - lw, y + 6, lw, TEXT_H]
            hint_box = None
            if wd["hint"]:
                hint_box = [edit[0] + edit[2] + 10, y + 6, text_w(wd["hint"]), TEXT_H]
            last = edit[1] + edit[3]
            y = last + 48
        bottom = last
        el = {
            "dom_id": wd["dom_id"],
            "kind": wd["kind"],
            "label": {"text": wd["label"], "box": label_box},
            "edit": spec["edit"],
            "required": wd["required"],
        }
        if hint_box:
            el["hint"] = {"text": wd["hint"], "box": hint_box}
        if "options" in spec:
            el["options"] = spec["options"]
        if wd["kind"] == "Dropdown":
            el["window_rows"] = 5
            el["wrap"] = wd["wrap"]
        if wd["calendar"]:
            el["calendar"] = dict(wd["calendar"], cell_w=32, cell_h=24)
        elements.append(el)
    sx = 80 if style == "top" else 300
    submit_box = [sx, bottom + 64, text_w(page["submit"]) + 32, 32]
    return elements, submit_box, submit_box[1] + submit_box[3]


def fixture_for(app, style):
    pages = []
    max_bottom = 0
    for page in app["pages"]:
        elements, submit_box, bottom = layout_page(page, style)
        max_bottom = max(max_bottom, bottom)
        rules = [{"when": "RequiredMissing", "message": "Please fill the required field {field}",
                  "effect": "Stay"}]
        if page["kind"] == "FinalSubmit":
            rules.append({"when": "Always", "message": page["success"], "effect": "Finish"})
        pages.append({
            "title": {"text": page["title"], "box": [80, 40, text_w(page["title"]), TEXT_H]},
            "elements": elements,
            "submit": {"text": page["submit"], "box": submit_box, "kind": page["kind"]},
            "feedback_box": [submit_box[0], submit_box[1] + submit_box[3] + 20, 600, 24],
            "feedback_rules": rules,
        })
    # Room below the last control for open popups and the feedback line.
    height = max(1024, max_bottom + 300)
    return {"name": app["name"], "width": WIDTH, "height": height, "pages": pages}


# ---- markup ----

def page_html(app, page, style, index):
    e = html.escape
    out = io.StringIO()
    out.write("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n")
    out.write(f"<title>{e(app['name'])}</title>\n")
    out.write("<style>\n  body { font-family: sans-serif; }\n  .row { margin: 12px 0; }\n"
              f"  .layout-{style} label {{ display: {'block' if style == 'top' else 'inline-block'}; }}\n"
              "</style>\n")
    out.write("<script>\n  window.analytics = window.analytics || [];\n"
              "  function track(e) { window.analytics.push(e); }\n</script>\n</head>\n")
    out.write(f"<body class=\"layout-{style}\">\n<!-- page {index} -->\n")
    out.write(f"<h1 class=\"title\">{e(page['title'])}</h1>\n")
    out.write(f"<form id=\"form-{index}\" method=\"post\" action=\"/submit/{index}\" onsubmit=\"track('submit')\">\n")
    for wd in page["widgets"]:
        req = " required" if wd["required"] else ""
        kind = wd["kind"]
        did = wd["dom_id"]
        if kind in ("Radio", "Checkbox"):
            t = "radio" if kind == "Radio" else "checkbox"
            out.write(f"  <fieldset class=\"row group\">\n    <legend>{e(wd['label'])}</legend>\n")
            for k, o in enumerate(wd["options"]):
                oid = f"{did}_{k}"
                out.write(f"    <input type=\"{t}\" id=\"{oid}\" name=\"{did}\" value=\"{e(o)}\"{req}>"
                          f" <label for=\"{oid}\">{e(o)}</label>\n")
            out.write("  </fieldset>\n")
            continue
        out.write(f"  <div class=\"row\" data-field=\"{did}\">\n")
        out.write(f"    <label for=\"{did}\" class=\"field-label\">{e(wd['label'])}</label>\n")
        if kind == "Dropdown":
            out.write(f"    <select id=\"{did}\" name=\"{did}\"{req}>\n")
            for o in wd["options"]:
                out.write(f"      <option value=\"{e(o)}\">{e(o)}</option>\n")
            out.write("    </select>\n")
        elif kind == "TextArea":
            out.write(f"    <textarea id=\"{did}\" name=\"{did}\" rows=\"3\"{req}></textarea>\n")
        elif kind == "DatePicker":
            out.write(f"    <input type=\"date\" id=\"{did}\" name=\"{did}\"{req}>\n")
        else:
            out.write(f"    <input type=\"text\" id=\"{did}\" name=\"{did}\" class=\"form-control\"{req}>\n")
        if wd["hint"]:
            out.write(f"    <small class=\"hint\">{e(wd['hint'])}</small>\n")
        out.write("  </div>\n")
    out.write(f"  <button type=\"submit\" class=\"btn btn-primary\">{e(page['submit'])}</button>\n")
    out.write("</form>\n</body>\n</html>\n")
    return out.getvalue()


# ---- tasks, truth, demonstration ----

def all_widgets(app):
    return [wd for p in app["pages"] for wd in p["widgets"]]


def csv_text(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def tasks_for(app_key, app, layout_index):
    widgets = all_widgets(app)
    rng = random.Random(f"{app_key}:{layout_index}")
    tasks = []
    for t in range(5):
        values = {}
        for wd in widgets:
            if not wd["required"] and rng.random() < 0.25:
                continue
            values[wd["label"]] = wd["value"](rng)
        omitted = OMIT.get((app_key, t))
        if omitted:
            values.pop(omitted, None)
        tasks.append((f"{app_key}-{layout_index + 1}-t{t + 1}", values, "Error" if omitted else "Success"))
    return tasks


def demo_values(app):
    """Pairwise distinct dummy values per page."""
    pages = []
    used = set()
    words = iter(["Alpha", "Bravo", "Kilo", "Delta", "Foxtrot", "Golf", "Hotel", "India", "Juliet",
                  "Lima", "Mike", "November", "Papa", "Quebec", "Romeo", "Sierra"])

    def key(s):
        return "".join(ch for ch in s.lower() if ch.isalnum()).translate(str.maketrans("01c", "ole"))

    def fresh(candidates):
        for c in candidates:
            if key(c) not in used:
                used.add(key(c))
                return c
        raise ValueError("no distinct dummy value")

    for p in app["pages"]:
        vals = {}
        for wd in p["widgets"]:
            kind = wd["kind"]
            if kind in ("TextInput", "TextArea"):
                vals[wd["label"]] = fresh(words)
            elif kind == "DatePicker":
                vals[wd["label"]] = fresh([f"2020-0{m}-1{m}" for m in range(1, 10)])
            else:
                vals[wd["label"]] = fresh(wd["options"][::-1])
        pages.append(vals)
    return pages


# ---- adversarial layouts ----
# Each case breaks the label-left-or-above convention on purpose. The
# expected lists name the fields whose rule-based or grid anchor differs
# from the demonstration anchor, derived by hand from the tie-break rules.

def text_box(x, y, text):
    return [x, y, text_w(text), TEXT_H]


ADVERSARIAL = {
    "label_below_edit": dict(
        reason="Labels sit under their edits. Rule-based pairs Alpha with the next edit down and "
               "turns Beta into that edit's hint. In the grid both labels trail an edit with no edit "
               "within one cell after them, so both become hint candidates and nothing is mapped.",
        widgets=[("Alpha", text_box(80, 152, "Alpha"), [80, 120, 320, 28]),
                 ("Beta", text_box(80, 272, "Beta"), [80, 240, 320, 28])],
        rule=["Alpha", "Beta"], grid=["Alpha", "Beta"]),
    "label_right_of_edit": dict(
        reason="Labels sit to the right of their edits. Papa leads the second edit at an 18 px gap "
               "and takes it in both strategies (grid: same-row left direction beats the other "
               "direction); Quebec only trails an edit and becomes its hint.",
        widgets=[("Papa", text_box(290, 126, "Papa"), [80, 120, 200, 28]),
                 ("Quebec", text_box(550, 126, "Quebec"), [340, 120, 200, 28])],
        rule=["Papa", "Quebec"], grid=["Papa", "Quebec"]),
    "right_below_tie": dict(
        reason="Romeo is 10 px from an edit on its right and 10 px from the edit below it. The "
               "tie-break prefers the edit to the right (rule: equal gap, right before below; grid: "
               "left direction ranks before other), but Romeo labels the edit below. Tango, the "
               "right-hand edit's true label, is right of it and ends up as a hint.",
        widgets=[("Romeo", text_box(80, 120, "Romeo"), [80, 146, 200, 28]),
                 ("Tango", text_box(340, 120, "Tango"), [130, 114, 200, 28])],
        rule=["Romeo", "Tango"], grid=["Romeo", "Tango"]),
    "label_too_far": dict(
        reason="Uniform is 284 px above its edit, beyond the 240 px rule-based gap and more than one "
               "grid cell away, so neither strategy maps it. Victor follows the convention and agrees.",
        widgets=[("Uniform", text_box(80, 120, "Uniform"), [80, 420, 320, 28]),
                 ("Victor", text_box(80, 500, "Victor"), [80, 520, 320, 28])],
        rule=["Uniform"], grid=["Uniform"]),
}


def write_adversarial(root):
    values = ["Kilo", "Lima"]
    for case, spec in ADVERSARIAL.items():
        d = root / "adversarial" / case
        elements = []
        page = dict(title=case, submit="Submit", kind="FinalSubmit", success="Form submitted successfully",
                    widgets=[])
        demo = {}
        for k, (label, lbox, edit) in enumerate(spec["widgets"]):
            dom_id = f"f{k + 1}"
            elements.append({"dom_id": dom_id, "kind": "TextInput",
                             "label": {"text": label, "box": lbox}, "edit": edit, "required": True})
            page["widgets"].append(w("TextInput", label, dom_id, True))
            demo[label] = values[k]
        fixture = {"name": case, "width": WIDTH, "height": 1024, "pages": [{
            "elements": elements,
            "submit": {"text": "Submit", "box": [900, 700, 80, 32], "kind": "FinalSubmit"},
            "feedback_rules": [{"when": "Always", "message": "Form submitted successfully",
                                "effect": "Finish"}],
        }]}
        write(d / "fixture.json", json.dumps(fixture, indent=2) + "\n")
        write(d / "page1.html", page_html({"name": case}, page, "top", 1))
        write(d / "demo.json", json.dumps({"pages": [demo]}, indent=2) + "\n")
        write(d / "expected.json", json.dumps({"rule": spec["rule"], "grid": spec["grid"],
                                              "reason": spec["reason"]}, indent=2) + "\n")
        write(d / "site.toml",
              f'site_id = "adv-{case}"\n'
              f'pages = ["page1.html"]\n'
              f'fixture = "fixture.json"\n'
              f'demo = "demo.json"\n'
              f'mapping_source = "demo"\n')


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = ap.parse_args()
    root = Path(args.out)
    for app_key, app in APPS.items():
        widgets = all_widgets(app)
        labels = [wd["label"] for wd in widgets]
        for li, style in enumerate(["top", "left"]):
            d = root / "apps" / app_key / style
            site_id = f"{app_key}-{style}"
            fixture = fixture_for(app, style)
            write(d / "fixture.json", json.dumps(fixture, indent=2) + "\n")
            pages = []
            for k, page in enumerate(app["pages"], start=1):
                write(d / f"page{k}.html", page_html(app, page, style, k))
                pages.append(f"page{k}.html")
            tasks = tasks_for(app_key, app, li)
            write(d / "tasks.csv", csv_text(["task_id"] + labels,
                                            [[tid] + [v.get(l, "") for l in labels] for tid, v, _ in tasks]))
            write(d / "truth.csv", csv_text(["task_id", "expected_outcome"] + labels,
                                            [[tid, out] + [v.get(l, "") for l in labels]
                                             for tid, v, out in tasks]))
            write(d / "mapping_truth.csv", csv_text(["field_name", "dom_id"],
                                                    [[wd["label"], wd["dom_id"]] for wd in widgets]))
            write(d / "demo.json", json.dumps({"pages": demo_values(app)}, indent=2) + "\n")
            pages_toml = ", ".join(f'"{p}"' for p in pages)
            write(d / "site.toml",
                  f'# {app["name"]}, {style}-aligned labels\n'
                  f'site_id = "{site_id}"\n'
                  f'url = "https://forms.example.test/{app_key}/{style}"\n'
                  f'pages = [{pages_toml}]\n'
                  f'fixture = "fixture.json"\n'
                  f'demo = "demo.json"\n'
                  f'mapping_source = "{app["strategy"]}"\n'
                  f'cell_size = 40\n')
    write_adversarial(root)


if __name__ == "__main__":
    main()
