#include "amg/catalog.hpp"

namespace amg::catalog {

const std::vector<DllEntry>& benign_dlls() {
  static const std::vector<DllEntry> table = {
      {"KERNEL32.dll",
       {"GetModuleHandleA", "GetProcAddress", "LoadLibraryA", "ExitProcess", "GetLastError", "CloseHandle",
        "CreateFileW", "ReadFile", "WriteFile", "GetCommandLineA", "GetTickCount", "Sleep", "HeapAlloc",
        "HeapFree", "GetStartupInfoA", "QueryPerformanceCounter"}},
      {"USER32.dll",
       {"MessageBoxA", "CreateWindowExW", "ShowWindow", "UpdateWindow", "GetMessageW", "DispatchMessageW",
        "TranslateMessage", "DefWindowProcW", "LoadIconW", "LoadCursorW", "RegisterClassExW", "PostQuitMessage"}},
      {"GDI32.dll", {"CreateFontW", "SelectObject", "DeleteObject", "BitBlt", "GetStockObject", "TextOutW"}},
      {"ADVAPI32.dll", {"RegOpenKeyExW", "RegQueryValueExW", "RegCloseKey", "GetUserNameW"}},
      {"msvcrt.dll", {"malloc", "free", "memcpy", "memset", "printf", "strlen", "_initterm", "exit"}},
      {"SHELL32.dll", {"ShellExecuteW", "SHGetFolderPathW", "DragQueryFileW"}},
      {"COMCTL32.dll", {"InitCommonControlsEx", "ImageList_Create"}},
      {"ole32.dll", {"CoInitialize", "CoCreateInstance", "CoUninitialize"}},
  };
  return table;
}

const std::vector<std::string_view>& suspicious_functions() {
  static const std::vector<std::string_view> table = {
      "VirtualAllocEx",      "WriteProcessMemory", "CreateRemoteThread", "SetWindowsHookExA",
      "GetAsyncKeyState",    "URLDownloadToFileA", "InternetOpenUrlA",   "IsDebuggerPresent",
      "OpenProcess",         "CryptEncrypt",       "NtUnmapViewOfSection", "AdjustTokenPrivileges",
      "RegSetValueExA",      "WinExec",            "ResumeThread",       "SetThreadContext",
  };
  return table;
}

const std::vector<std::string_view>& benign_section_names() {
  static const std::vector<std::string_view> table = {".text", ".data", ".rdata", ".rsrc",
                                                      ".reloc", ".idata", ".bss"};
  return table;
}

const std::vector<std::string_view>& suspicious_section_names() {
  static const std::vector<std::string_view> table = {
      "UPX0",     ".upx1",  ".packed", ".crypt",  ".vmp0",   ".aspack", ".themida", ".nsp0",
      ".petite", ".mpress", ".enigma", ".boom",   ".stub",   ".adata",  ".perplex", ".xyz"};
  return table;
}

const std::vector<Motif>& motifs() {
  static const std::vector<Motif> table = {
      {0x64, 0xA1, 0x30, 0x00, 0x00, 0x00, 0x8B, 0x40},  // PEB walk
      {0xEB, 0xFE, 0xCC, 0xCC, 0x90, 0x90, 0xEB, 0xFE},
      {0x31, 0xC9, 0xF7, 0xE1, 0xB0, 0x0B, 0xCD, 0x80},
      {0x68, 0x33, 0x32, 0x00, 0x00, 0x68, 0x77, 0x73},
      {0xFC, 0xE8, 0x82, 0x00, 0x00, 0x00, 0x60, 0x89},
      {0x8B, 0x52, 0x0C, 0x8B, 0x52, 0x14, 0x8B, 0x72},
      {0x0F, 0xB7, 0x4A, 0x26, 0x31, 0xFF, 0xAC, 0x3C},
      {0x5D, 0x68, 0x6E, 0x65, 0x74, 0x00, 0x68, 0x77},
      {0xD9, 0x74, 0x24, 0xF4, 0x5B, 0x81, 0x73, 0x13},
      {0xE2, 0xF5, 0x52, 0x57, 0x8B, 0x52, 0x10, 0x8B},
      {0x4D, 0x5A, 0xE8, 0x00, 0x00, 0x00, 0x00, 0x5B},
      {0xAD, 0x96, 0xAD, 0x8B, 0x58, 0x10, 0x8B, 0x53},
  };
  return table;
}

}  // namespace amg::catalog
