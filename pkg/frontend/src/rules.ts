/** Client-side validation of the context-rule file format.
 *
 * Rule files are small fixed-shape YAML documents:
 *
 *   rule_id: "parking_queue_overflow"
 *   condition:
 *     metric: "valetparking_cpu_by_pod"
 *     threshold: 80.0
 *     operator: ">"
 *   inject_node: "parking_queue"
 *   inject_edge:
 *     from: "parking_queue"
 *     to: "valetparking_cpu_by_pod"
 *
 * The parser below covers exactly this two-level mapping shape (plus
 * multi-document `---` separators and `#` comments), which lets the editor
 * reject malformed rules before anything is sent to the server.
 */

export const OPERATORS = [">", "<", ">=", "<=", "=="] as const;

export type ParsedRule = {
  rule_id: string;
  condition: { metric: string; threshold: number; operator: string };
  inject_node: string;
  inject_edge: { from: string; to: string };
};

export type Validation =
  | { ok: true; rules: ParsedRule[] }
  | { ok: false; error: string };

type Section = Record<string, string | Record<string, string>>;

function unquote(raw: string): string {
  const trimmed = raw.trim();
  if (
    (trimmed.startsWith('"') && trimmed.endsWith('"')) ||
    (trimmed.startsWith("'") && trimmed.endsWith("'"))
  ) {
    return trimmed.slice(1, -1);
  }
  return trimmed;
}

function parseDocument(lines: string[], docIndex: number): Section {
  const doc: Section = {};
  let currentKey: string | null = null;
  for (const rawLine of lines) {
    const line = rawLine.replace(/\t/g, "  ");
    const stripped = line.replace(/#.*$/, "").trimEnd();
    if (!stripped.trim()) continue;
    const indented = /^\s+/.test(stripped);
    const match = stripped.trim().match(/^([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.*)$/);
    if (!match) {
      throw new Error(`rule ${docIndex}: cannot parse line "${stripped.trim()}"`);
    }
    const [, key, value] = match;
    if (!indented) {
      if (value === "") {
        doc[key] = {};
        currentKey = key;
      } else {
        doc[key] = unquote(value);
        currentKey = null;
      }
    } else {
      if (currentKey === null || typeof doc[currentKey] === "string") {
        throw new Error(`rule ${docIndex}: unexpected indented key "${key}"`);
      }
      (doc[currentKey] as Record<string, string>)[key] = unquote(value);
    }
  }
  return doc;
}

function requireScalar(doc: Section, key: string, docIndex: number): string {
  const value = doc[key];
  if (value === undefined || typeof value !== "string" || value === "") {
    throw new Error(`rule ${docIndex}: missing field "${key}"`);
  }
  return value;
}

function requireNested(
  doc: Section,
  key: string,
  fields: string[],
  docIndex: number,
): Record<string, string> {
  const section = doc[key];
  if (section === undefined || typeof section === "string") {
    throw new Error(`rule ${docIndex}: missing field "${key}"`);
  }
  for (const field of fields) {
    if (!(field in section) || section[field] === "") {
      throw new Error(`rule ${docIndex}: missing field "${key}.${field}"`);
    }
  }
  return section;
}

export function validateRules(text: string): Validation {
  try {
    const documents = text
      .split(/^---\s*$/m)
      .map((chunk) => chunk.split("\n"))
      .filter((lines) => lines.some((l) => l.trim() && !l.trim().startsWith("#")));
    if (documents.length === 0) {
      return { ok: false, error: "no rules found" };
    }
    const rules: ParsedRule[] = [];
    const seen = new Set<string>();
    documents.forEach((lines, index) => {
      const doc = parseDocument(lines, index);
      const ruleId = requireScalar(doc, "rule_id", index);
      const condition = requireNested(doc, "condition", ["metric", "threshold", "operator"], index);
      const injectNode = requireScalar(doc, "inject_node", index);
      const edge = requireNested(doc, "inject_edge", ["from", "to"], index);
      const operator = condition.operator;
      if (!OPERATORS.includes(operator as (typeof OPERATORS)[number])) {
        throw new Error(`rule ${index}: unknown operator "${operator}"`);
      }
      const threshold = Number(condition.threshold);
      if (!Number.isFinite(threshold)) {
        throw new Error(`rule ${index}: threshold "${condition.threshold}" is not a number`);
      }
      if (seen.has(ruleId)) {
        throw new Error(`rule ${index}: duplicate rule_id "${ruleId}"`);
      }
      seen.add(ruleId);
      rules.push({
        rule_id: ruleId,
        condition: { metric: condition.metric, threshold, operator },
        inject_node: injectNode,
        inject_edge: { from: edge.from, to: edge.to },
      });
    });
    return { ok: true, rules };
  } catch (err) {
    return { ok: false, error: err instanceof Error ? err.message : String(err) };
  }
}
