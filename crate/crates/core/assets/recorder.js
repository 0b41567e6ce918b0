(function () {
  "use strict";
  var LOG_ID = "formbench-event-log";
  var store = document.getElementById(LOG_ID);
  if (!store) {
    return;
  }
  var log;
  try {
    log = JSON.parse(store.textContent);
  } catch (e) {
    log = { header: { version: 1, malformed: true }, events: [] };
  }
  var forms = document.getElementsByTagName("form");
  var form = forms.length === 1 ? forms[0] : null;
  var last = 0;

  function describe(el) {
    return {
      tag: el.tagName.toLowerCase(),
      id: el.id || null,
      name: el.getAttribute("name"),
      in_form: !!(form && form.contains(el))
    };
  }

  function isControl(el) {
    var t = el.tagName;
    return t === "INPUT" || t === "SELECT" || t === "TEXTAREA" || t === "BUTTON";
  }

  function flush() {
    var text = JSON.stringify(log);
    store.textContent = text;
    try {
      window.sessionStorage.setItem(LOG_ID, text);
    } catch (e) {
      // Storage may be unavailable; the DOM copy remains.
    }
  }

  function record(kind) {
    return function (ev) {
      var el = ev.target;
      if (!el || el.nodeType !== 1 || el.closest("#formbench-recorder")) {
        return;
      }
      if (kind !== "click" && !isControl(el)) {
        return;
      }
      last = Math.max(last, Date.now());
      log.events.push({ timestamp_ms: last, target_descriptor: describe(el), event_kind: kind });
      flush();
    };
  }

  ["input", "change", "click", "focus"].forEach(function (kind) {
    document.addEventListener(kind, record(kind), true);
  });
  flush();
})();
